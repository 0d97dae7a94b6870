#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gspn/circuit.hpp"
#include "gspn/graph.hpp"

namespace gspn {

// How the permutation-sensitive circuit is turned into a graph distribution.
enum class Variant { none, exact, sort, kary, rand };

std::string to_string(Variant v);
// Throws ConfigError on unknown names.
Variant parse_variant(const std::string& name);

// A trained (or freshly built) graph model: the circuit plus everything
// needed to interpret its variables.
struct GraphSPNModel {
  Circuit circuit;
  Variant variant = Variant::sort;
  int k = 2;   // sub-graph size, kary only
  int N = 20;  // permutation count, rand only
  Representation rep;
  StructureConfig structure;
  std::vector<std::string> node_names;  // q entries
  std::vector<std::string> edge_names;  // r entries

  // Representation the circuit itself sees: m slots, or k for kary.
  Representation circuit_rep() const;
  // Throws DimensionError if the circuit scope disagrees with the variant.
  void check() const;
};

// Builds an untrained model with a fresh circuit over the right scope.
GraphSPNModel make_model(const Representation& rep, Variant variant, const StructureConfig& cfg,
                         int k = 2, int N = 20, std::vector<std::string> node_names = {},
                         std::vector<std::string> edge_names = {});

inline constexpr int kModelFormatVersion = 1;

// Versioned text format: "GSPN <version>" header, representation and
// structure metadata, then the layer table with every parameter printed with
// 17 significant digits, so a reload evaluates bit-identically.
void serialize(const GraphSPNModel& m, std::ostream& os);
std::string serialize(const GraphSPNModel& m);
// Throws VersionError / FormatError; never returns a partial model.
GraphSPNModel deserialize(std::istream& is);
GraphSPNModel deserialize(const std::string& text);

void save_model(const GraphSPNModel& m, const std::string& path);
GraphSPNModel load_model(const std::string& path);

// A bare circuit in the same layer-table format ("GSPC" header, no graph
// metadata).
void serialize_circuit(const Circuit& c, std::ostream& os);
Circuit deserialize_circuit(std::istream& is);
Circuit load_circuit(const std::string& path);

}  // namespace gspn
