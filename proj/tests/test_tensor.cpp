#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "graphtrans/tensor.hpp"

using namespace graphtrans;

TEST_CASE("shape helpers") {
    CHECK(shape_numel({2, 3}) == 6);
    CHECK(shape_numel({5}) == 5);
    CHECK(shape_numel({}) == 1);
    CHECK(shape_str({2, 3}) == "[2x3]");
    CHECK(shape_str({7}) == "[7]");
    CHECK(shape_str({}) == "[]");
}

TEST_CASE("tensor factories") {
    auto z = Tensor<double>::zeros({2, 3});
    CHECK(z.numel() == 6);
    CHECK(z.rank() == 2);
    CHECK(std::all_of(z.data().begin(), z.data().end(), [](double v) { return v == 0.0; }));

    auto f = Tensor<float>::full({4}, 2.5f);
    CHECK(std::all_of(f.data().begin(), f.data().end(), [](float v) { return v == 2.5f; }));

    auto s = Tensor<double>::scalar(3.0);
    CHECK(s.value() == 3.0);

    auto t = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    CHECK(t.data() == std::vector<double>{1, 2, 3, 4});

    CHECK_THROWS_AS(Tensor<double>({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK_THROWS_AS(t.value(), ShapeError);
}

TEST_CASE("tensor handles share the buffer; detached copies do not") {
    auto a = Tensor<double>::from({2}, {1, 2});
    Tensor<double> b = a;
    CHECK(a.same_buffer(b));
    b.data()[0] = 9;
    CHECK(a.data()[0] == 9);

    auto c = a.detached_copy();
    CHECK_FALSE(a.same_buffer(c));
    CHECK(c.data() == a.data());
    c.data()[1] = 7;
    CHECK(a.data()[1] == 2);
    CHECK_FALSE(c.requires_grad());
}

TEST_CASE("gradient buffers allocate lazily") {
    auto t = Tensor<double>::zeros({3});
    CHECK_FALSE(t.grad_allocated());
    t.zero_grad();  // no-op on unallocated grad
    CHECK_FALSE(t.grad_allocated());
    t.grad()[1] = 5.0;
    CHECK(t.grad_allocated());
    CHECK(t.grad() == std::vector<double>{0, 5, 0});
    t.zero_grad();
    CHECK(t.grad() == std::vector<double>{0, 0, 0});
}

TEST_CASE("tape rejects bad losses") {
    Tape<double> tape;
    auto vec = Tensor<double>::zeros({2});
    vec.set_tape_owner(&tape);
    CHECK_THROWS_AS(tape.backward(vec), ShapeError);

    auto foreign = Tensor<double>::scalar(1.0);
    CHECK_THROWS_AS(tape.backward(foreign), ValueError);

    Tape<double> other;
    auto owned = Tensor<double>::scalar(1.0);
    owned.set_tape_owner(&other);
    CHECK_THROWS_AS(tape.backward(owned), ValueError);
}

TEST_CASE("tape replays nodes in reverse and seeds the loss gradient") {
    Tape<double> tape;
    std::vector<int> order;
    tape.record([&order] { order.push_back(1); });
    tape.record([&order] { order.push_back(2); });
    tape.record([&order] { order.push_back(3); });

    auto loss = Tensor<double>::scalar(0.0);
    loss.set_tape_owner(&tape);
    tape.backward(loss);
    CHECK(order == std::vector<int>{3, 2, 1});
    CHECK(loss.grad()[0] == 1.0);

    // a second replay accumulates into existing gradients
    tape.backward(loss);
    CHECK(loss.grad()[0] == 2.0);
}

TEST_CASE("tape scope activates and restores, including nesting") {
    CHECK(Tape<double>::current() == nullptr);
    Tape<double> outer;
    {
        Tape<double>::Scope s1(outer);
        CHECK(Tape<double>::current() == &outer);
        Tape<double> inner;
        {
            Tape<double>::Scope s2(inner);
            CHECK(Tape<double>::current() == &inner);
        }
        CHECK(Tape<double>::current() == &outer);
    }
    CHECK(Tape<double>::current() == nullptr);
}

TEST_CASE("mix64 matches the splitmix64 reference outputs") {
    CHECK(mix64(0) == 0xe220a8397b1dcdafULL);
    CHECK(mix64(1) == 0x910a2dec89025cc1ULL);
    CHECK(mix64(0xdeadbeefULL) == 0x4adfb90f68c9eb9bULL);
}

TEST_CASE("derive_seed separates substreams") {
    const auto a = derive_seed(42, 0);
    const auto b = derive_seed(42, 1);
    const auto c = derive_seed(43, 0);
    CHECK(a != b);
    CHECK(a != c);
    CHECK(b != c);
}

TEST_CASE("rng uniform stays in [0,1) and is reproducible") {
    Rng r1(1234), r2(1234), r3(99);
    bool any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        const double u = r1.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(r2.uniform() == u);
        if (r3.uniform() != u) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("rng uniform_int respects bounds") {
    Rng r(7);
    std::vector<int> seen(5, 0);
    for (int i = 0; i < 2000; ++i) {
        const int v = r.uniform_int(5);
        REQUIRE(v >= 0);
        REQUIRE(v < 5);
        ++seen[static_cast<std::size_t>(v)];
    }
    for (int count : seen) CHECK(count > 0);
}

TEST_CASE("rng normal has roughly standard moments") {
    Rng r(2024);
    const int n = 40000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = r.normal(0.0, 1.0);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("rng shuffle permutes and is seed-deterministic") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    Rng r1(5);
    r1.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(50);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted == expect);

    std::vector<int> w(50);
    std::iota(w.begin(), w.end(), 0);
    Rng r2(5);
    r2.shuffle(w);
    CHECK(w == v);
}

TEST_CASE("counter rng is a pure function of seed, stream, index") {
    const double v = CounterRng::uniform(11, 3, 100);
    CHECK(v == CounterRng::uniform(11, 3, 100));
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    CHECK(CounterRng::uniform(11, 3, 101) != v);
    CHECK(CounterRng::uniform(11, 4, 100) != v);
    CHECK(CounterRng::uniform(12, 3, 100) != v);

    CounterRng rng(11);
    CHECK(rng.seed() == 11);
    CHECK(rng.next_stream() == 0);
    CHECK(rng.next_stream() == 1);
    CHECK(rng.next_stream() == 2);
}

TEST_CASE("parameter initializers") {
    Rng rng(3);
    auto w = glorot_uniform<double>(10, 20, {10, 20}, rng);
    CHECK(w.requires_grad());
    const double limit = std::sqrt(6.0 / 30.0);
    for (double v : w.data()) {
        CHECK(v >= -limit);
        CHECK(v < limit);
    }

    auto e = normal_init<float>({100}, 0.02, rng);
    CHECK(e.requires_grad());
    bool spread = false;
    for (float v : e.data()) {
        CHECK(std::abs(v) < 0.2f);  // 10 sigma
        if (v != e.data()[0]) spread = true;
    }
    CHECK(spread);

    auto b = zeros_param<double>({4});
    CHECK(b.requires_grad());
    CHECK(std::all_of(b.data().begin(), b.data().end(), [](double v) { return v == 0.0; }));

    auto g = ones_param<double>({4});
    CHECK(g.requires_grad());
    CHECK(std::all_of(g.data().begin(), g.data().end(), [](double v) { return v == 1.0; }));
}
