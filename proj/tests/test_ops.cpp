#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "graphtrans/grad_check.hpp"
#include "graphtrans/ops.hpp"

using namespace graphtrans;

namespace {

Tensor<double> rand_tensor(Shape shape, std::uint64_t seed, double lo = -1.0,
                           double hi = 1.0, bool rg = true) {
    Rng rng(seed);
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    t.set_requires_grad(rg);
    return t;
}

// Weighted-sum objective so every output entry carries a distinct gradient.
Tensor<double> weighted(const Tensor<double>& out, std::uint64_t seed = 999) {
    auto w = rand_tensor(out.shape(), seed, -1.0, 1.0, false);
    return sum_all(mul(out, w));
}

void expect_grads_ok(const std::function<Tensor<double>()>& f,
                     std::vector<std::pair<std::string, Tensor<double>>> params,
                     double tol = 1e-5) {
    auto rep = check_gradients<double>(f, params);
    INFO("worst: ", rep.worst_param, "[", rep.worst_index, "] rel err ", rep.max_rel_err);
    CHECK(rep.max_rel_err < tol);
    CHECK(rep.entries_checked > 0);
}

}  // namespace

// ---------------------------------------------------------------------------
// forward oracles
// ---------------------------------------------------------------------------

TEST_CASE("elementwise forward values") {
    auto a = Tensor<double>::from({3}, {1, -2, 3});
    auto b = Tensor<double>::from({3}, {4, 5, -6});
    CHECK(add(a, b).data() == std::vector<double>{5, 3, -3});
    CHECK(sub(a, b).data() == std::vector<double>{-3, -7, 9});
    CHECK(mul(a, b).data() == std::vector<double>{4, -10, -18});
    CHECK(scale(a, 2.0).data() == std::vector<double>{2, -4, 6});
    CHECK(relu(a).data() == std::vector<double>{1, 0, 3});
    auto c = Tensor<double>::from({2}, {1.0, std::exp(1.0)});
    CHECK(log(c).data()[0] == doctest::Approx(0.0));
    CHECK(log(c).data()[1] == doctest::Approx(1.0));

    auto mism = Tensor<double>::from({2}, {1, 2});
    CHECK_THROWS_AS(add(a, mism), ShapeError);
    CHECK_THROWS_AS(scale_by(a, mism), ShapeError);
}

TEST_CASE("matmul forward values and shape errors") {
    auto a = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    auto b = Tensor<double>::from({2, 2}, {5, 6, 7, 8});
    CHECK(matmul(a, b).data() == std::vector<double>{19, 22, 43, 50});

    // [2,2,2] x [2,2] — shared right operand
    auto batch = Tensor<double>::from({2, 2, 2}, {1, 0, 0, 1, 1, 2, 3, 4});
    auto out = matmul(batch, b);
    CHECK(out.shape() == Shape{2, 2, 2});
    CHECK(out.data() == std::vector<double>{5, 6, 7, 8, 19, 22, 43, 50});

    // [2,1,2] x [2,2,2] — shared left would need a [1,2] left operand; use
    // equal leading dims instead
    auto lhs = Tensor<double>::from({2, 1, 2}, {1, 0, 0, 1});
    auto rhs = Tensor<double>::from({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    auto sliced = matmul(lhs, rhs);
    CHECK(sliced.shape() == Shape{2, 1, 2});
    CHECK(sliced.data() == std::vector<double>{1, 2, 7, 8});

    // [2,2] x [2,2,2] — shared left operand
    auto shared_left = matmul(a, rhs);
    CHECK(shared_left.shape() == Shape{2, 2, 2});
    CHECK(shared_left.data() == std::vector<double>{7, 10, 15, 22, 19, 22, 43, 50});

    auto bad = Tensor<double>::from({3, 2}, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(matmul(a, bad), ShapeError);
    auto lead_a = Tensor<double>::zeros({2, 2, 2});
    auto lead_b = Tensor<double>::zeros({3, 2, 2});
    CHECK_THROWS_AS(matmul(lead_a, lead_b), ShapeError);
    CHECK_THROWS_AS(matmul(Tensor<double>::zeros({2}), a), ShapeError);
}

TEST_CASE("transpose_last forward") {
    auto x = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto t = transpose_last(x);
    CHECK(t.shape() == Shape{3, 2});
    CHECK(t.data() == std::vector<double>{1, 4, 2, 5, 3, 6});

    auto b = Tensor<double>::from({2, 1, 2}, {1, 2, 3, 4});
    auto tb = transpose_last(b);
    CHECK(tb.shape() == Shape{2, 2, 1});
    CHECK(tb.data() == std::vector<double>{1, 2, 3, 4});
    CHECK_THROWS_AS(transpose_last(Tensor<double>::zeros({3})), ShapeError);
}

TEST_CASE("split_heads / merge_heads layout") {
    // x[1,2,4]: token 0 = (0,1,2,3), token 1 = (10,11,12,13)
    auto x = Tensor<double>::from({1, 2, 4}, {0, 1, 2, 3, 10, 11, 12, 13});
    auto h = split_heads(x, 2);
    CHECK(h.shape() == Shape{1, 2, 2, 2});
    // head 0 carries columns 0..1, head 1 columns 2..3
    CHECK(h.data() == std::vector<double>{0, 1, 10, 11, 2, 3, 12, 13});
    auto back = merge_heads(h);
    CHECK(back.shape() == x.shape());
    CHECK(back.data() == x.data());

    CHECK_THROWS_AS(split_heads(x, 3), ShapeError);
    CHECK_THROWS_AS(split_heads(Tensor<double>::zeros({2, 4}), 2), ShapeError);
    CHECK_THROWS_AS(merge_heads(x), ShapeError);
}

TEST_CASE("softmax matches the reference values") {
    auto x = Tensor<double>::from({1, 3}, {1, 2, 3});
    auto p = softmax(x);
    CHECK(p.data()[0] == doctest::Approx(0.09003057317038046).epsilon(1e-9));
    CHECK(p.data()[1] == doctest::Approx(0.24472847105479764).epsilon(1e-9));
    CHECK(p.data()[2] == doctest::Approx(0.6652409557748218).epsilon(1e-9));
    CHECK(p.data()[0] + p.data()[1] + p.data()[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax is shift-invariant and overflow-safe") {
    auto x = Tensor<double>::from({1, 3}, {1, 2, 3});
    auto shifted = Tensor<double>::from({1, 3}, {1 + 1000.0, 2 + 1000.0, 3 + 1000.0});
    auto p = softmax(x), q = softmax(shifted);
    for (int i = 0; i < 3; ++i) {
        CHECK(p.data()[static_cast<std::size_t>(i)] ==
              doctest::Approx(q.data()[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
    auto huge = Tensor<double>::from({1, 2}, {1e300, 1e300});
    auto ph = softmax(huge);
    CHECK(ph.data()[0] == doctest::Approx(0.5));
    CHECK(ph.data()[1] == doctest::Approx(0.5));
}

TEST_CASE("masked softmax zeroes masked entries exactly and renormalizes") {
    auto x = Tensor<double>::from({2, 4}, {1, 2, 3, 4, 5, 5, 5, 5});
    BoolTensor mask({2, 4}, 1);
    mask.v = {1, 1, 0, 1, 1, 0, 0, 0};
    auto p = masked_softmax(x, mask);
    CHECK(p.data()[2] == 0.0);
    // row 0 renormalizes over entries {1,2,4}
    const double e1 = std::exp(1.0 - 4.0), e2 = std::exp(2.0 - 4.0), e4 = 1.0;
    const double z = e1 + e2 + e4;
    CHECK(p.data()[0] == doctest::Approx(e1 / z).epsilon(1e-12));
    CHECK(p.data()[1] == doctest::Approx(e2 / z).epsilon(1e-12));
    CHECK(p.data()[3] == doctest::Approx(e4 / z).epsilon(1e-12));
    // row 1 keeps only its first entry
    CHECK(p.data()[4] == 1.0);
    CHECK(p.data()[5] == 0.0);
    CHECK(p.data()[6] == 0.0);
    CHECK(p.data()[7] == 0.0);
}

TEST_CASE("masked softmax rejects degenerate rows and bad masks") {
    auto x = Tensor<double>::from({1, 3}, {1, 2, 3});
    BoolTensor dead({1, 3}, 0);
    CHECK_THROWS_AS(masked_softmax(x, dead), DegenerateRowError);

    BoolTensor wrong_rank({3}, 1);
    CHECK_THROWS_AS(masked_softmax(x, wrong_rank), ShapeError);
    BoolTensor wrong_last({1, 2}, 1);
    CHECK_THROWS_AS(masked_softmax(x, wrong_last), ShapeError);
    auto y = Tensor<double>::zeros({4, 3});
    BoolTensor no_bcast({2, 3}, 1);
    CHECK_THROWS_AS(masked_softmax(y, no_bcast), ShapeError);
}

TEST_CASE("masked softmax broadcasts mask over leading axes") {
    // logits [2,2,3], mask [2,1,3]: one key mask per batch element
    auto x = Tensor<double>::from({2, 2, 3}, {1, 2, 3, 4, 5, 6, 1, 1, 1, 2, 2, 2});
    BoolTensor mask({2, 1, 3}, 1);
    mask.v = {1, 1, 0, 0, 1, 1};
    auto p = masked_softmax(x, mask);
    // batch 0: last column masked in both rows
    CHECK(p.data()[2] == 0.0);
    CHECK(p.data()[5] == 0.0);
    // batch 1: first column masked, remaining two equal logits -> 0.5 each
    CHECK(p.data()[6] == 0.0);
    CHECK(p.data()[7] == doctest::Approx(0.5));
    CHECK(p.data()[8] == doctest::Approx(0.5));
    CHECK(p.data()[9] == 0.0);
    CHECK(p.data()[10] == doctest::Approx(0.5));
    CHECK(p.data()[11] == doctest::Approx(0.5));
}

TEST_CASE("layer_norm standardizes with population variance") {
    auto x = Tensor<double>::from({1, 3}, {1, 2, 3});
    auto gain = ones_param<double>({3});
    auto bias = zeros_param<double>({3});
    auto y = layer_norm(x, gain, bias, 0.0);
    CHECK(y.data()[0] == doctest::Approx(-1.224744871391589).epsilon(1e-12));
    CHECK(y.data()[1] == doctest::Approx(0.0));
    CHECK(y.data()[2] == doctest::Approx(1.224744871391589).epsilon(1e-12));

    // affine parameters apply elementwise after standardization
    auto g2 = Tensor<double>::from({3}, {2, 2, 2});
    auto b2 = Tensor<double>::from({3}, {10, 10, 10});
    auto y2 = layer_norm(x, g2, b2, 0.0);
    CHECK(y2.data()[0] == doctest::Approx(10.0 - 2 * 1.224744871391589).epsilon(1e-12));

    // eps keeps constant rows finite
    auto flat = Tensor<double>::from({1, 3}, {5, 5, 5});
    auto yf = layer_norm(flat, gain, bias, 1e-5);
    CHECK(yf.data()[0] == 0.0);

    CHECK_THROWS_AS(layer_norm(x, Tensor<double>::zeros({2}), bias, 1e-5), ShapeError);
}

TEST_CASE("dropout modes") {
    auto x = rand_tensor({4, 8}, 21);
    CHECK_THROWS_AS(dropout(x, -0.1, true, nullptr), ValueError);
    CHECK_THROWS_AS(dropout(x, 1.0, true, nullptr), ValueError);
    CHECK_THROWS_AS(dropout(x, 0.5, true, nullptr), ValueError);

    // eval mode and p == 0 are identity pass-throughs
    CHECK(dropout(x, 0.5, false, nullptr).same_buffer(x));
    CounterRng rng(5);
    CHECK(dropout(x, 0.0, true, &rng).same_buffer(x));

    // training: entries are zero or scaled by 1/(1-p)
    auto y = dropout(x, 0.5, true, &rng);
    int zeros = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) {
        const double v = y.data()[i];
        if (v == 0.0) {
            ++zeros;
        } else {
            CHECK(v == doctest::Approx(2.0 * x.data()[i]).epsilon(1e-12));
        }
    }
    CHECK(zeros > 0);
    CHECK(zeros < static_cast<int>(y.numel()));

    // same seed, same stream -> identical mask (the p == 0 call above claimed
    // no stream, so y used stream 0); later stream -> different mask
    CounterRng rng2(5);
    auto y2 = dropout(x, 0.5, true, &rng2);
    CHECK(y2.data() == y.data());
    auto y3 = dropout(x, 0.5, true, &rng2);
    CHECK(y3.data() != y.data());
}

TEST_CASE("embedding lookup gathers rows") {
    auto table = Tensor<double>::from({3, 2}, {0, 1, 10, 11, 20, 21});
    auto out = embedding_lookup(table, {2, 0, 2}, {3});
    CHECK(out.shape() == Shape{3, 2});
    CHECK(out.data() == std::vector<double>{20, 21, 0, 1, 20, 21});

    auto shaped = embedding_lookup(table, {0, 1, 1, 2}, {2, 2});
    CHECK(shaped.shape() == Shape{2, 2, 2});

    CHECK_THROWS_AS(embedding_lookup(table, {3}, {1}), ValueError);
    CHECK_THROWS_AS(embedding_lookup(table, {-1}, {1}), ValueError);
    CHECK_THROWS_AS(embedding_lookup(table, {0, 1}, {3}), ShapeError);
    CHECK_THROWS_AS(embedding_lookup(Tensor<double>::zeros({3}), {0}, {1}), ShapeError);
}

TEST_CASE("select_tokens picks one row per sequence") {
    auto x = Tensor<double>::from({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    auto out = select_tokens(x, {1, 0});
    CHECK(out.shape() == Shape{2, 2});
    CHECK(out.data() == std::vector<double>{3, 4, 5, 6});
    CHECK_THROWS_AS(select_tokens(x, {0}), ShapeError);
    CHECK_THROWS_AS(select_tokens(x, {0, 2}), ValueError);
    CHECK_THROWS_AS(select_tokens(Tensor<double>::zeros({2, 2}), {0, 0}), ShapeError);
}

TEST_CASE("masked_mean_tokens averages only unmasked tokens") {
    auto x = Tensor<double>::from({2, 3, 2}, {1, 2, 3, 4, 100, 100,
                                              10, 20, 30, 40, 50, 60});
    BoolTensor mask({2, 3}, 1);
    mask.v = {1, 1, 0, 1, 1, 1};
    auto out = masked_mean_tokens(x, mask);
    CHECK(out.shape() == Shape{2, 2});
    CHECK(out.data()[0] == doctest::Approx(2.0));
    CHECK(out.data()[1] == doctest::Approx(3.0));
    CHECK(out.data()[2] == doctest::Approx(30.0));
    CHECK(out.data()[3] == doctest::Approx(40.0));

    BoolTensor dead({2, 3}, 0);
    dead.v = {1, 0, 0, 0, 0, 0};
    CHECK_THROWS_AS(masked_mean_tokens(x, dead), ValueError);
    BoolTensor wrong({3, 2}, 1);
    CHECK_THROWS_AS(masked_mean_tokens(x, wrong), ShapeError);
}

TEST_CASE("reshape preserves data and counts") {
    auto x = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto r = reshape(x, {3, 2});
    CHECK(r.shape() == Shape{3, 2});
    CHECK(r.data() == x.data());
    CHECK_FALSE(r.same_buffer(x));
    CHECK_THROWS_AS(reshape(x, {4, 2}), ShapeError);
}

TEST_CASE("masked_sum_tokens sums only unmasked tokens") {
    auto x = Tensor<double>::from({2, 3, 2}, {1, 2, 3, 4, 100, 100,
                                              10, 20, 30, 40, 50, 60});
    BoolTensor mask({2, 3}, 1);
    mask.v = {1, 1, 0, 1, 1, 1};
    auto out = masked_sum_tokens(x, mask);
    CHECK(out.shape() == Shape{2, 2});
    CHECK(out.data() == std::vector<double>{4, 6, 90, 120});
    BoolTensor wrong({3, 2}, 1);
    CHECK_THROWS_AS(masked_sum_tokens(x, wrong), ShapeError);
}

TEST_CASE("zero_masked_rows blanks masked rows") {
    auto x = Tensor<double>::from({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    BoolTensor mask({2, 2}, 1);
    mask.v = {1, 0, 0, 1};
    auto out = zero_masked_rows(x, mask);
    CHECK(out.data() == std::vector<double>{1, 2, 0, 0, 0, 0, 7, 8});
    BoolTensor wrong({3}, 1);
    CHECK_THROWS_AS(zero_masked_rows(x, wrong), ShapeError);
}

TEST_CASE("prepend_token inserts the shared token at position zero") {
    auto x = Tensor<double>::from({2, 1, 2}, {1, 2, 3, 4});
    auto tok = Tensor<double>::from({2}, {9, 8});
    auto out = prepend_token(x, tok);
    CHECK(out.shape() == Shape{2, 2, 2});
    CHECK(out.data() == std::vector<double>{9, 8, 1, 2, 9, 8, 3, 4});
    CHECK_THROWS_AS(prepend_token(x, Tensor<double>::zeros({3})), ShapeError);
}

TEST_CASE("concat_last joins feature axes") {
    auto a = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    auto b = Tensor<double>::from({2, 1}, {9, 8});
    auto out = concat_last(a, b);
    CHECK(out.shape() == Shape{2, 3});
    CHECK(out.data() == std::vector<double>{1, 2, 9, 3, 4, 8});
    CHECK_THROWS_AS(concat_last(a, Tensor<double>::zeros({3, 1})), ShapeError);
    CHECK_THROWS_AS(concat_last(a, Tensor<double>::zeros({2, 1, 1})), ShapeError);
}

TEST_CASE("add_bias and add_broadcast") {
    auto x = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    auto b = Tensor<double>::from({2}, {10, 20});
    CHECK(add_bias(x, b).data() == std::vector<double>{11, 22, 13, 24});
    CHECK_THROWS_AS(add_bias(x, Tensor<double>::zeros({3})), ShapeError);

    auto pen = Tensor<double>::from({2, 1, 2}, {100, 200, 300, 400});
    auto y = Tensor<double>::from({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    auto out = add_broadcast(y, pen);
    CHECK(out.data() == std::vector<double>{101, 202, 103, 204, 305, 406, 307, 408});
    CHECK_THROWS_AS(add_broadcast(y, Tensor<double>::zeros({2, 2})), ShapeError);
    CHECK_THROWS_AS(add_broadcast(y, Tensor<double>::zeros({2, 3, 2})), ShapeError);
}

TEST_CASE("reductions") {
    auto x = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
    CHECK(sum_all(x).value() == 10.0);
    CHECK(mean_all(x).value() == doctest::Approx(2.5));
}

TEST_CASE("cross_entropy matches hand-computed values") {
    auto logits = Tensor<double>::from({1, 2}, {0.0, std::log(3.0)});
    auto loss = cross_entropy(logits, {1});
    CHECK(loss.value() == doctest::Approx(0.2876820724517809).epsilon(1e-12));

    auto uniform = Tensor<double>::zeros({1, 2});
    CHECK(cross_entropy(uniform, {0}).value() ==
          doctest::Approx(0.6931471805599453).epsilon(1e-12));

    // batch mean
    auto two = Tensor<double>::from({2, 2}, {0.0, std::log(3.0), 0.0, 0.0});
    CHECK(cross_entropy(two, {1, 0}).value() ==
          doctest::Approx(0.5 * (0.2876820724517809 + 0.6931471805599453)).epsilon(1e-12));

    // overflow safety through the max shift: naive exp would produce inf
    auto big = Tensor<double>::from({1, 2}, {1e300, 1e300});
    CHECK(std::isfinite(cross_entropy(big, {0}).value()));
    auto offset = Tensor<double>::from({1, 2}, {1e4, 1e4});
    CHECK(cross_entropy(offset, {0}).value() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));

    CHECK_THROWS_AS(cross_entropy(logits, {2}), ValueError);
    CHECK_THROWS_AS(cross_entropy(logits, {-1}), ValueError);
    CHECK_THROWS_AS(cross_entropy(logits, {0, 1}), ValueError);
    CHECK_THROWS_AS(cross_entropy(Tensor<double>::zeros({2}), {0}), ShapeError);
}

// ---------------------------------------------------------------------------
// autodiff engine semantics
// ---------------------------------------------------------------------------

TEST_CASE("gradients accumulate when a tensor is used twice") {
    auto x = rand_tensor({3}, 1);
    Tape<double> tape;
    Tape<double>::Scope scope(tape);
    auto loss = sum_all(add(x, x));
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == 2.0);

    auto y = rand_tensor({3}, 2);
    auto loss2 = sum_all(mul(y, y));
    tape.backward(loss2);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(y.grad()[i] == doctest::Approx(2.0 * y.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("repeated backward accumulates gradients") {
    auto x = rand_tensor({2}, 3);
    Tape<double> tape;
    Tape<double>::Scope scope(tape);
    auto loss = sum_all(scale(x, 3.0));
    tape.backward(loss);
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == 6.0);
}

TEST_CASE("ops do not record without an active tape or grad-requiring input") {
    auto x = rand_tensor({2}, 4);  // requires_grad, but no tape
    auto y = add(x, x);
    CHECK_FALSE(y.requires_grad());

    Tape<double> tape;
    Tape<double>::Scope scope(tape);
    auto c = rand_tensor({2}, 5, -1, 1, false);  // constant under a tape
    auto z = add(c, c);
    CHECK_FALSE(z.requires_grad());
    CHECK(tape.size() == 0);

    auto w = add(x, c);
    CHECK(w.requires_grad());
    CHECK(tape.size() == 1);
}

TEST_CASE("gradient flows through a matmul-relu chain") {
    auto w = Tensor<double>::from({2, 2}, {1, -1, 2, 1});
    w.set_requires_grad(true);
    auto x = Tensor<double>::from({1, 2}, {1, 1});
    Tape<double> tape;
    Tape<double>::Scope scope(tape);
    auto h = relu(matmul(x, w));  // x@w = [3, 0] -> relu [3, 0]
    auto loss = sum_all(h);
    tape.backward(loss);
    // only the first output column is active; dW = x^T @ [1, 0]
    CHECK(w.grad() == std::vector<double>{1, 0, 1, 0});
}

TEST_CASE("grad check flags nondeterministic objectives") {
    auto x = rand_tensor({2}, 6);
    int calls = 0;
    auto f = [&]() {
        ++calls;
        return sum_all(scale(x, 1.0 + 0.5 * calls));
    };
    CHECK_THROWS_AS(
        check_gradients<double>(f, {{"x", x}}),
        DeterminismError);
}

// ---------------------------------------------------------------------------
// finite-difference gradient checks, one per op
// ---------------------------------------------------------------------------

TEST_CASE("grad: elementwise ops") {
    auto a = rand_tensor({2, 3}, 10);
    auto b = rand_tensor({2, 3}, 11);
    expect_grads_ok([&] { return weighted(add(a, b)); }, {{"a", a}, {"b", b}});
    expect_grads_ok([&] { return weighted(sub(a, b)); }, {{"a", a}, {"b", b}});
    expect_grads_ok([&] { return weighted(mul(a, b)); }, {{"a", a}, {"b", b}});
    expect_grads_ok([&] { return weighted(scale(a, -1.7)); }, {{"a", a}});

    auto s = Tensor<double>::from({1}, {0.8});
    s.set_requires_grad(true);
    expect_grads_ok([&] { return weighted(scale_by(a, s)); }, {{"a", a}, {"s", s}});
}

TEST_CASE("grad: relu and log") {
    // keep inputs away from the relu kink and log's pole
    auto x = rand_tensor({3, 3}, 12);
    for (auto& v : x.data()) v += (v >= 0 ? 0.5 : -0.5);
    expect_grads_ok([&] { return weighted(relu(x)); }, {{"x", x}});

    auto p = rand_tensor({2, 4}, 13, 0.5, 2.0);
    expect_grads_ok([&] { return weighted(log(p)); }, {{"p", p}});
}

TEST_CASE("grad: bias and broadcast adds") {
    auto x = rand_tensor({2, 3, 4}, 14);
    auto b = rand_tensor({4}, 15);
    expect_grads_ok([&] { return weighted(add_bias(x, b)); }, {{"x", x}, {"b", b}});

    auto pen = rand_tensor({2, 1, 4}, 16);
    expect_grads_ok([&] { return weighted(add_broadcast(x, pen)); },
                    {{"x", x}, {"pen", pen}});
}

TEST_CASE("grad: matmul layouts") {
    auto a2 = rand_tensor({3, 4}, 20);
    auto b2 = rand_tensor({4, 2}, 21);
    expect_grads_ok([&] { return weighted(matmul(a2, b2)); }, {{"a", a2}, {"b", b2}});

    auto a3 = rand_tensor({2, 3, 4}, 22);
    expect_grads_ok([&] { return weighted(matmul(a3, b2)); }, {{"a", a3}, {"b", b2}});

    auto b3 = rand_tensor({2, 4, 2}, 23);
    expect_grads_ok([&] { return weighted(matmul(a3, b3)); }, {{"a", a3}, {"b", b3}});

    auto left = rand_tensor({3, 4}, 24);
    expect_grads_ok([&] { return weighted(matmul(left, b3)); }, {{"l", left}, {"b", b3}});
}

TEST_CASE("grad: layout ops") {
    auto x = rand_tensor({2, 3, 4}, 30);
    expect_grads_ok([&] { return weighted(transpose_last(x)); }, {{"x", x}});
    expect_grads_ok([&] { return weighted(split_heads(x, 2)); }, {{"x", x}});

    auto h = rand_tensor({2, 2, 3, 2}, 31);
    expect_grads_ok([&] { return weighted(merge_heads(h)); }, {{"h", h}});

    auto a = rand_tensor({2, 3}, 32);
    auto b = rand_tensor({2, 2}, 33);
    expect_grads_ok([&] { return weighted(concat_last(a, b)); }, {{"a", a}, {"b", b}});

    auto tok = rand_tensor({4}, 34);
    expect_grads_ok([&] { return weighted(prepend_token(x, tok)); },
                    {{"x", x}, {"tok", tok}});
}

TEST_CASE("grad: softmax variants") {
    auto x = rand_tensor({2, 5}, 40);
    expect_grads_ok([&] { return weighted(softmax(x)); }, {{"x", x}});

    BoolTensor mask({2, 5}, 1);
    mask.v = {1, 1, 0, 1, 0, 0, 1, 1, 1, 1};
    expect_grads_ok([&] { return weighted(masked_softmax(x, mask)); }, {{"x", x}});

    auto att = rand_tensor({2, 2, 3, 4}, 41);
    BoolTensor key_mask({2, 1, 1, 4}, 1);
    key_mask.v = {1, 1, 1, 0, 1, 1, 0, 0};
    expect_grads_ok([&] { return weighted(masked_softmax(att, key_mask)); }, {{"att", att}});
}

TEST_CASE("grad: layer_norm") {
    auto x = rand_tensor({3, 4}, 50);
    auto gain = rand_tensor({4}, 51, 0.5, 1.5);
    auto bias = rand_tensor({4}, 52);
    expect_grads_ok(
        [&] { return weighted(layer_norm(x, gain, bias, 1e-5)); },
        {{"x", x}, {"gain", gain}, {"bias", bias}});
}

TEST_CASE("grad: dropout with a replayable mask") {
    auto x = rand_tensor({3, 4}, 60);
    expect_grads_ok(
        [&] {
            CounterRng rng(123);  // fresh generator: same mask every call
            return weighted(dropout(x, 0.4, true, &rng));
        },
        {{"x", x}});
}

TEST_CASE("grad: gather ops") {
    auto table = rand_tensor({5, 3}, 70);
    expect_grads_ok(
        [&] { return weighted(embedding_lookup(table, {0, 2, 2, 4}, {4})); },
        {{"table", table}});

    auto x = rand_tensor({2, 3, 4}, 71);
    expect_grads_ok([&] { return weighted(select_tokens(x, {2, 0})); }, {{"x", x}});

    BoolTensor mask({2, 3}, 1);
    mask.v = {1, 0, 1, 1, 1, 1};
    expect_grads_ok([&] { return weighted(masked_mean_tokens(x, mask)); }, {{"x", x}});
    expect_grads_ok([&] { return weighted(masked_sum_tokens(x, mask)); }, {{"x", x}});
    expect_grads_ok([&] { return weighted(zero_masked_rows(x, mask)); }, {{"x", x}});
    expect_grads_ok([&] { return weighted(reshape(x, {6, 4})); }, {{"x", x}});
}

TEST_CASE("grad: reductions and loss") {
    auto x = rand_tensor({2, 3}, 80);
    expect_grads_ok([&] { return sum_all(x); }, {{"x", x}});
    expect_grads_ok([&] { return mean_all(x); }, {{"x", x}});

    auto logits = rand_tensor({4, 3}, 81);
    expect_grads_ok([&] { return cross_entropy(logits, {0, 2, 1, 2}); },
                    {{"logits", logits}});
}
