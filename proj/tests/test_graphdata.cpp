#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "graphtrans/graph.hpp"
#include "graphtrans/tu_io.hpp"

using namespace graphtrans;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("graphtrans_test_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

// triangle (nodes 1-3) + single edge (nodes 4-5); raw labels intentionally
// non-dense to exercise the remap
void write_fixture(const fs::path& dir, const std::string& name) {
    write_file(dir / (name + "_A.txt"),
               "1, 2\n2, 1\n1, 3\n3, 1\n2, 3\n3, 2\n4, 5\n5, 4\n");
    write_file(dir / (name + "_graph_indicator.txt"), "1\n1\n1\n2\n2\n");
    write_file(dir / (name + "_graph_labels.txt"), "3\n5\n");
    write_file(dir / (name + "_node_labels.txt"), "7\n9\n7\n9\n9\n");
}

bool graphs_equal(const Graph& a, const Graph& b) {
    return a.num_nodes == b.num_nodes && a.edges == b.edges &&
           a.node_labels == b.node_labels && a.label == b.label;
}

// boolean (A+I)^n by repeated boolean matrix multiplication
std::vector<std::uint8_t> bool_power(const Graph& g, int n) {
    const std::size_t N = static_cast<std::size_t>(g.num_nodes);
    std::vector<std::uint8_t> base(N * N, 0);
    for (std::size_t i = 0; i < N; ++i) base[i * N + i] = 1;
    for (auto [u, v] : g.edges) {
        base[static_cast<std::size_t>(u) * N + static_cast<std::size_t>(v)] = 1;
        base[static_cast<std::size_t>(v) * N + static_cast<std::size_t>(u)] = 1;
    }
    std::vector<std::uint8_t> acc = base;
    for (int step = 1; step < n; ++step) {
        std::vector<std::uint8_t> next(N * N, 0);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t k = 0; k < N; ++k) {
                if (!acc[i * N + k]) continue;
                for (std::size_t j = 0; j < N; ++j) {
                    if (base[k * N + j]) next[i * N + j] = 1;
                }
            }
        acc = std::move(next);
    }
    return acc;
}

}  // namespace

TEST_CASE("graph validation") {
    Graph g;
    g.num_nodes = 3;
    g.node_labels = {0, 1, 0};
    g.edges = {{0, 1}, {1, 2}};
    CHECK_NOTHROW(validate_graph(g));

    Graph bad = g;
    bad.edges.push_back({1, 3});
    CHECK_THROWS_AS(validate_graph(bad), ValueError);
    bad = g;
    bad.edges.push_back({2, 2});
    CHECK_THROWS_AS(validate_graph(bad), ValueError);
    bad = g;
    bad.edges.push_back({1, 0});  // duplicate of (0,1)
    CHECK_THROWS_AS(validate_graph(bad), ValueError);
    bad = g;
    bad.node_labels.pop_back();
    CHECK_THROWS_AS(validate_graph(bad), ValueError);
}

TEST_CASE("permute_graph relabels nodes consistently") {
    Graph g;
    g.num_nodes = 3;
    g.node_labels = {5, 6, 7};
    g.edges = {{0, 1}, {1, 2}};
    g.label = 1;
    auto p = permute_graph(g, {2, 0, 1});  // node i -> perm[i]
    CHECK(p.node_labels == std::vector<int>{6, 7, 5});
    CHECK(p.edges == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}});
    CHECK(p.label == 1);
    CHECK_THROWS_AS(permute_graph(g, {0, 1}), ValueError);
}

TEST_CASE("tu loader reads the two-graph fixture") {
    TempDir tmp("tu_fixture");
    write_fixture(tmp.path, "FIX");
    auto ds = load_tu_dataset(tmp.path.string(), "FIX");
    REQUIRE(ds.graphs.size() == 2);
    CHECK(ds.name == "FIX");
    CHECK(ds.num_classes == 2);
    CHECK(ds.num_node_label_values == 2);

    CHECK(ds.graphs[0].num_nodes == 3);
    CHECK(ds.graphs[0].edges.size() == 3);
    CHECK(ds.graphs[1].num_nodes == 2);
    CHECK(ds.graphs[1].edges.size() == 1);
    CHECK(ds.graphs[1].edges[0] == std::pair<int, int>{0, 1});

    // raw labels 3/5 -> 0/1, node labels 7/9 -> 0/1
    CHECK(ds.graphs[0].label == 0);
    CHECK(ds.graphs[1].label == 1);
    CHECK(ds.graphs[0].node_labels == std::vector<int>{0, 1, 0});
    CHECK(ds.graphs[1].node_labels == std::vector<int>{1, 1});
}

TEST_CASE("tu loader error paths") {
    TempDir tmp("tu_errors");
    CHECK_THROWS_AS(load_tu_dataset(tmp.path.string(), "NONE"), LoadError);
    CHECK_THROWS_WITH_AS(load_tu_dataset(tmp.path.string(), "NONE"),
                         doctest::Contains("NONE_graph_indicator.txt"), LoadError);

    write_fixture(tmp.path, "BADIND");
    write_file(tmp.path / "BADIND_graph_indicator.txt", "0\n1\n1\n2\n2\n");
    CHECK_THROWS_AS(load_tu_dataset(tmp.path.string(), "BADIND"), IntegrityError);

    write_fixture(tmp.path, "DANGLE");
    write_file(tmp.path / "DANGLE_A.txt", "1, 2\n2, 1\n1, 6\n6, 1\n");
    CHECK_THROWS_AS(load_tu_dataset(tmp.path.string(), "DANGLE"), IntegrityError);

    write_fixture(tmp.path, "SELF");
    write_file(tmp.path / "SELF_A.txt", "1, 1\n");
    CHECK_THROWS_AS(load_tu_dataset(tmp.path.string(), "SELF"), IntegrityError);

    write_fixture(tmp.path, "CROSS");
    write_file(tmp.path / "CROSS_A.txt", "1, 4\n4, 1\n");
    CHECK_THROWS_AS(load_tu_dataset(tmp.path.string(), "CROSS"), IntegrityError);

    write_fixture(tmp.path, "JUNK");
    write_file(tmp.path / "JUNK_node_labels.txt", "7\nx\n7\n9\n9\n");
    CHECK_THROWS_AS(load_tu_dataset(tmp.path.string(), "JUNK"), IntegrityError);
}

TEST_CASE("tu round trip preserves the dataset") {
    Dataset ds;
    ds.name = "RT";
    ds.num_node_label_values = 3;
    ds.num_classes = 2;
    Rng rng(77);
    for (int i = 0; i < 12; ++i) {
        Graph g = erdos_renyi(4 + rng.uniform_int(8), 0.4, derive_seed(77, i));
        for (auto& l : g.node_labels) l = rng.uniform_int(3);
        g.label = rng.uniform_int(2);
        ds.graphs.push_back(std::move(g));
    }
    // ensure every label value appears so the dense remap is the identity
    ds.graphs[0].node_labels[0] = 0;
    ds.graphs[0].node_labels[1] = 1;
    ds.graphs[0].node_labels[2] = 2;
    ds.graphs[0].label = 0;
    ds.graphs[1].label = 1;

    TempDir tmp("tu_roundtrip");
    save_tu_dataset(ds, tmp.path.string());
    auto back = load_tu_dataset(tmp.path.string(), "RT");
    REQUIRE(back.graphs.size() == ds.graphs.size());
    CHECK(back.num_node_label_values == ds.num_node_label_values);
    CHECK(back.num_classes == ds.num_classes);
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        CAPTURE(i);
        CHECK(graphs_equal(back.graphs[i], ds.graphs[i]));
    }
}

TEST_CASE("split slices by floor arithmetic") {
    Dataset ds;
    ds.num_classes = 2;
    ds.num_node_label_values = 1;
    for (int i = 0; i < 10; ++i) {
        Graph g;
        g.num_nodes = 1;
        g.node_labels = {0};
        g.label = i % 2;
        ds.graphs.push_back(g);
    }
    auto s = split(ds, 0.8, 0.1, 42);
    CHECK(s.train.graphs.size() == 8);
    CHECK(s.valid.graphs.size() == 1);
    CHECK(s.test.graphs.size() == 1);
    CHECK(s.train.num_classes == 2);

    auto s2 = split(ds, 0.8, 0.1, 42);
    bool same = true;
    for (std::size_t i = 0; i < 8; ++i) {
        if (!graphs_equal(s.train.graphs[i], s2.train.graphs[i])) same = false;
    }
    CHECK(same);

    Dataset empty;
    CHECK_THROWS_AS(split(empty, 0.8, 0.1, 1), ValueError);
    CHECK_THROWS_AS(split(ds, 0.0, 0.5, 1), ValueError);
    CHECK_THROWS_AS(split(ds, 0.9, 0.1, 1), ValueError);
}

TEST_CASE("split of 4110 graphs gives 3288/411/411") {
    Dataset ds;
    ds.num_classes = 2;
    ds.num_node_label_values = 1;
    Graph unit;
    unit.num_nodes = 1;
    unit.node_labels = {0};
    for (int i = 0; i < 4110; ++i) ds.graphs.push_back(unit);
    auto s = split(ds, 0.8, 0.1, 0);
    CHECK(s.train.graphs.size() == 3288);
    CHECK(s.valid.graphs.size() == 411);
    CHECK(s.test.graphs.size() == 411);
}

TEST_CASE("make_batch pads and normalizes") {
    Graph one;
    one.num_nodes = 1;
    one.node_labels = {0};
    auto b1 = make_batch<double>({one}, GnnType::GCN, 2);
    CHECK(b1.n_max == 1);
    CHECK(b1.adjacency.data() == std::vector<double>{1.0});

    Graph path;
    path.num_nodes = 2;
    path.node_labels = {0, 1};
    path.edges = {{0, 1}};
    auto b2 = make_batch<double>({path}, GnnType::GCN, 2);
    CHECK(b2.adjacency.data()[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b2.adjacency.data()[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b2.adjacency.data()[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b2.adjacency.data()[3] == doctest::Approx(0.5).epsilon(1e-12));

    Graph tri;
    tri.num_nodes = 3;
    tri.node_labels = {0, 1, 0};
    tri.edges = {{0, 1}, {0, 2}, {1, 2}};
    tri.label = 1;
    auto batch = make_batch<double>({tri, path}, GnnType::GCN, 2);
    CHECK(batch.n_max == 3);
    CHECK(batch.graph_sizes == std::vector<int>{3, 2});
    CHECK(batch.labels == std::vector<int>{1, 0});
    CHECK(batch.padding_mask.v ==
          std::vector<std::uint8_t>{1, 1, 1, 1, 1, 0});
    // padding slots carry the sentinel label id
    CHECK(batch.node_label_block ==
          std::vector<int>{0, 1, 0, 0, 1, 2});
    // adjacency outside the real prefix is zero
    for (int r = 0; r < 3; ++r) {
        CHECK(batch.adjacency.data()[static_cast<std::size_t>(9 + r * 3 + 2)] == 0.0);
        CHECK(batch.adjacency.data()[static_cast<std::size_t>(9 + 2 * 3 + r)] == 0.0);
    }
    CHECK_FALSE(batch.adjacency.requires_grad());

    CHECK_THROWS_AS(make_batch<double>({}, GnnType::GCN, 2), ValueError);
    Graph badlabel = path;
    badlabel.node_labels = {0, 5};
    CHECK_THROWS_AS(make_batch<double>({badlabel}, GnnType::GCN, 2), ValueError);
}

TEST_CASE("make_batch GIN adjacency is raw and symmetric") {
    Graph tri;
    tri.num_nodes = 3;
    tri.node_labels = {0, 0, 0};
    tri.edges = {{0, 1}, {1, 2}};
    auto b = make_batch<float>({tri}, GnnType::GIN, 1);
    const auto& a = b.adjacency.data();
    CHECK(a == std::vector<float>{0, 1, 0, 1, 0, 1, 0, 1, 0});
}

TEST_CASE("make_batch of a permuted graph gives P A P^T") {
    Graph g = erdos_renyi(7, 0.4, 3);
    for (int i = 0; i < 7; ++i) g.node_labels[static_cast<std::size_t>(i)] = i % 2;
    std::vector<int> perm = {3, 0, 6, 2, 5, 1, 4};
    Graph pg = permute_graph(g, perm);

    for (GnnType t : {GnnType::GCN, GnnType::GIN}) {
        auto b = make_batch<double>({g}, t, 2);
        auto pb = make_batch<double>({pg}, t, 2);
        for (int u = 0; u < 7; ++u)
            for (int v = 0; v < 7; ++v) {
                const double orig = b.adjacency.data()[static_cast<std::size_t>(u * 7 + v)];
                const double moved =
                    pb.adjacency.data()[static_cast<std::size_t>(
                        perm[static_cast<std::size_t>(u)] * 7 +
                        perm[static_cast<std::size_t>(v)])];
                CHECK(moved == doctest::Approx(orig).epsilon(1e-12));
            }
    }
}

TEST_CASE("erdos_renyi respects density bounds") {
    auto empty = erdos_renyi(10, 0.0, 1);
    CHECK(empty.edges.empty());
    CHECK(empty.num_nodes == 10);
    CHECK_NOTHROW(validate_graph(empty));

    auto full = erdos_renyi(4, 1.0, 1);
    CHECK(full.edges.size() == 6);

    CHECK_THROWS_AS(erdos_renyi(4, -0.1, 1), ValueError);
    CHECK_THROWS_AS(erdos_renyi(4, 1.1, 1), ValueError);
    CHECK_THROWS_AS(erdos_renyi(-1, 0.5, 1), ValueError);

    auto a = erdos_renyi(30, 0.3, 9);
    auto b = erdos_renyi(30, 0.3, 9);
    CHECK(a.edges == b.edges);
}

TEST_CASE("erdos_renyi mean edge count matches the binomial expectation") {
    double total = 0.0;
    for (int seed = 0; seed < 20; ++seed) {
        total += static_cast<double>(erdos_renyi(500, 0.2, static_cast<std::uint64_t>(seed))
                                         .edges.size());
    }
    const double mean = total / 20.0;
    CHECK(mean == doctest::Approx(24950.0).epsilon(0.01));
}

TEST_CASE("hop_mask hand cases") {
    Graph tri;
    tri.num_nodes = 3;
    tri.node_labels = {0, 0, 0};
    tri.edges = {{0, 1}, {0, 2}, {1, 2}};
    auto m = hop_mask(tri, 1);
    for (std::size_t i = 0; i < 9; ++i) CHECK(m.reach.v[i] == 1);

    Graph path;
    path.num_nodes = 3;
    path.node_labels = {0, 0, 0};
    path.edges = {{0, 1}, {1, 2}};
    auto h1 = hop_mask(path, 1);
    CHECK_FALSE(h1.at(0, 2));
    CHECK_FALSE(h1.at(2, 0));
    CHECK(h1.at(0, 1));
    CHECK(h1.at(0, 0));
    auto h2 = hop_mask(path, 2);
    for (std::size_t i = 0; i < 9; ++i) CHECK(h2.reach.v[i] == 1);

    CHECK_THROWS_AS(hop_mask(path, 0), ValueError);
}

TEST_CASE("hop_mask equals the boolean matrix power oracle and is monotone") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        Graph g = erdos_renyi(20, 0.12, seed);
        std::vector<std::uint8_t> prev;
        for (int n = 1; n <= 4; ++n) {
            auto m = hop_mask(g, n);
            auto oracle = bool_power(g, n);
            CHECK(m.reach.v == oracle);
            // symmetric with an all-true diagonal
            for (int u = 0; u < 20; ++u) {
                CHECK(m.at(u, u));
                for (int v = 0; v < 20; ++v) CHECK(m.at(u, v) == m.at(v, u));
            }
            if (!prev.empty()) {
                for (std::size_t i = 0; i < prev.size(); ++i) {
                    if (prev[i]) CHECK(m.reach.v[i] == 1);
                }
            }
            prev = m.reach.v;
        }
    }
}

TEST_CASE("cycle-pair corpus matches token multisets across classes") {
    auto ds = make_cycle_pair_dataset(40, 11);
    REQUIRE(ds.graphs.size() == 80);
    CHECK(ds.num_classes == 2);
    int class0 = 0;
    for (std::size_t i = 0; i < ds.graphs.size(); i += 2) {
        const Graph& a = ds.graphs[i];
        const Graph& b = ds.graphs[i + 1];
        CHECK_NOTHROW(validate_graph(a));
        CHECK_NOTHROW(validate_graph(b));
        CHECK(a.label == 0);
        CHECK(b.label == 1);
        class0 += 1;
        CHECK(a.num_nodes == b.num_nodes);
        // same label multiset -> identical sorted label lists
        auto la = a.node_labels, lb = b.node_labels;
        std::sort(la.begin(), la.end());
        std::sort(lb.begin(), lb.end());
        CHECK(la == lb);
        // both 2-regular with n edges total
        CHECK(a.edges.size() == static_cast<std::size_t>(a.num_nodes));
        CHECK(b.edges.size() == static_cast<std::size_t>(b.num_nodes));
    }
    CHECK(class0 == 40);
    CHECK_THROWS_AS(make_cycle_pair_dataset(0, 1), ValueError);
}
