#pragma once

#include <string>

#include "graphtrans/graph.hpp"

namespace graphtrans {

// Reads the four-file graph-kernel text layout from `directory`:
//   {name}_A.txt              one "i, j" 1-based edge per line, both directions
//   {name}_graph_indicator.txt line k holds the 1-based graph id of node k
//   {name}_graph_labels.txt   one class label per graph
//   {name}_node_labels.txt    one label per node
// Node and graph labels are remapped to dense 0-based ranges; the two
// directed copies of each edge collapse to one undirected edge.
Dataset load_tu_dataset(const std::string& directory, const std::string& name);

// Inverse of load_tu_dataset for already-dense labels; writes both directed
// copies of every edge so the output is loadable by any TU reader.
void save_tu_dataset(const Dataset& ds, const std::string& directory);

}  // namespace graphtrans
