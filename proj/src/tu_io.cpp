#include "graphtrans/tu_io.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "graphtrans/errors.hpp"

namespace graphtrans {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open " + path);
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        // tolerate CR line endings and surrounding whitespace
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' ||
                                 line.back() == '\t')) {
            line.pop_back();
        }
        std::size_t start = 0;
        while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
        line.erase(0, start);
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

long parse_int(const std::string& text, const std::string& path, std::size_t lineno) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(text, &pos);
    } catch (const std::exception&) {
        throw IntegrityError(path + ": line " + std::to_string(lineno) +
                             " is not an integer: '" + text + "'");
    }
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos != text.size()) {
        throw IntegrityError(path + ": line " + std::to_string(lineno) +
                             " has trailing content: '" + text + "'");
    }
    return v;
}

std::vector<long> read_int_column(const std::string& path) {
    const auto lines = read_lines(path);
    std::vector<long> out;
    out.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        out.push_back(parse_int(lines[i], path, i + 1));
    }
    return out;
}

std::pair<long, long> parse_edge_line(std::string line, const std::string& path,
                                      std::size_t lineno) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    long u = 0, v = 0;
    if (!(is >> u >> v)) {
        throw IntegrityError(path + ": line " + std::to_string(lineno) +
                             " is not an 'i, j' pair: '" + line + "'");
    }
    std::string rest;
    if (is >> rest) {
        throw IntegrityError(path + ": line " + std::to_string(lineno) +
                             " has trailing content");
    }
    return {u, v};
}

// Dense remap in ascending order of the raw values.
std::map<long, int> dense_remap(const std::vector<long>& values) {
    std::set<long> distinct(values.begin(), values.end());
    std::map<long, int> remap;
    int next = 0;
    for (long v : distinct) remap[v] = next++;
    return remap;
}

}  // namespace

Dataset load_tu_dataset(const std::string& directory, const std::string& name) {
    namespace fs = std::filesystem;
    const std::string base = (fs::path(directory) / name).string() + "_";
    const std::string a_path = base + "A.txt";
    const std::string ind_path = base + "graph_indicator.txt";
    const std::string glab_path = base + "graph_labels.txt";
    const std::string nlab_path = base + "node_labels.txt";

    const std::vector<long> indicator = read_int_column(ind_path);
    const std::vector<long> graph_labels_raw = read_int_column(glab_path);
    const std::vector<long> node_labels_raw = read_int_column(nlab_path);

    const std::size_t total_nodes = indicator.size();
    if (node_labels_raw.size() != total_nodes) {
        throw IntegrityError(nlab_path + ": " + std::to_string(node_labels_raw.size()) +
                             " node labels for " + std::to_string(total_nodes) + " nodes");
    }
    const std::size_t num_graphs = graph_labels_raw.size();

    // map global 1-based node ids to (graph, local index)
    std::vector<int> node_graph(total_nodes);
    std::vector<int> node_local(total_nodes);
    std::vector<int> counts(num_graphs, 0);
    for (std::size_t k = 0; k < total_nodes; ++k) {
        const long gid = indicator[k];
        if (gid < 1 || gid > static_cast<long>(num_graphs)) {
            throw IntegrityError(ind_path + ": line " + std::to_string(k + 1) +
                                 " names graph " + std::to_string(gid) + " outside 1.." +
                                 std::to_string(num_graphs));
        }
        node_graph[k] = static_cast<int>(gid - 1);
        node_local[k] = counts[static_cast<std::size_t>(gid - 1)]++;
    }

    const auto node_remap = dense_remap(node_labels_raw);
    const auto graph_remap = dense_remap(graph_labels_raw);

    Dataset ds;
    ds.name = name;
    ds.num_node_label_values = static_cast<int>(node_remap.size());
    ds.num_classes = static_cast<int>(graph_remap.size());
    ds.graphs.resize(num_graphs);
    for (std::size_t g = 0; g < num_graphs; ++g) {
        ds.graphs[g].num_nodes = counts[g];
        ds.graphs[g].node_labels.resize(static_cast<std::size_t>(counts[g]));
        ds.graphs[g].label = graph_remap.at(graph_labels_raw[g]);
    }
    for (std::size_t k = 0; k < total_nodes; ++k) {
        ds.graphs[static_cast<std::size_t>(node_graph[k])]
            .node_labels[static_cast<std::size_t>(node_local[k])] =
            node_remap.at(node_labels_raw[k]);
    }

    const auto edge_lines = read_lines(a_path);
    std::vector<std::set<std::pair<int, int>>> edge_sets(num_graphs);
    for (std::size_t i = 0; i < edge_lines.size(); ++i) {
        const auto [gu, gv] = parse_edge_line(edge_lines[i], a_path, i + 1);
        if (gu < 1 || gu > static_cast<long>(total_nodes) || gv < 1 ||
            gv > static_cast<long>(total_nodes)) {
            throw IntegrityError(a_path + ": line " + std::to_string(i + 1) +
                                 " references node outside 1.." +
                                 std::to_string(total_nodes));
        }
        const std::size_t ku = static_cast<std::size_t>(gu - 1);
        const std::size_t kv = static_cast<std::size_t>(gv - 1);
        if (node_graph[ku] != node_graph[kv]) {
            throw IntegrityError(a_path + ": line " + std::to_string(i + 1) +
                                 " joins nodes of different graphs");
        }
        if (ku == kv) {
            throw IntegrityError(a_path + ": line " + std::to_string(i + 1) +
                                 " is a self-loop");
        }
        const auto key = std::minmax(node_local[ku], node_local[kv]);
        edge_sets[static_cast<std::size_t>(node_graph[ku])].insert(key);
    }
    for (std::size_t g = 0; g < num_graphs; ++g) {
        ds.graphs[g].edges.assign(edge_sets[g].begin(), edge_sets[g].end());
        validate_graph(ds.graphs[g]);
    }
    return ds;
}

void save_tu_dataset(const Dataset& ds, const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    const std::string base = (fs::path(directory) / ds.name).string() + "_";

    std::ofstream a(base + "A.txt");
    std::ofstream ind(base + "graph_indicator.txt");
    std::ofstream glab(base + "graph_labels.txt");
    std::ofstream nlab(base + "node_labels.txt");
    if (!a || !ind || !glab || !nlab) {
        throw LoadError("cannot create dataset files under " + directory);
    }

    long node_base = 1;  // global 1-based id of each graph's first node
    for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
        const Graph& graph = ds.graphs[g];
        glab << graph.label << "\n";
        for (int v = 0; v < graph.num_nodes; ++v) {
            ind << (g + 1) << "\n";
            nlab << graph.node_labels[static_cast<std::size_t>(v)] << "\n";
        }
        for (auto [u, v] : graph.edges) {
            a << (node_base + u) << ", " << (node_base + v) << "\n";
            a << (node_base + v) << ", " << (node_base + u) << "\n";
        }
        node_base += graph.num_nodes;
    }
}

}  // namespace graphtrans
