#include "gspn/model.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gspn/error.hpp"
#include "gspn/logspace.hpp"

namespace gspn {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::none: return "none";
    case Variant::exact: return "exact";
    case Variant::sort: return "sort";
    case Variant::kary: return "kary";
    case Variant::rand: return "rand";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::none, Variant::exact, Variant::sort, Variant::kary, Variant::rand}) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + name + "' (expected none, exact, sort, kary or rand)");
}

Representation GraphSPNModel::circuit_rep() const {
  Representation r = rep;
  if (variant == Variant::kary) r.m = k;
  return r;
}

void GraphSPNModel::check() const {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (N < 1) throw ConfigError("N must be at least 1");
  if (variant == Variant::kary && k > rep.m) throw ConfigError("k cannot exceed m");
  const Representation cr = circuit_rep();
  if (!(circuit.spec() == cr.variable_spec())) {
    throw DimensionError("circuit scope of " + std::to_string(circuit.var_count()) +
                         " variables does not match the " + to_string(variant) +
                         " representation (" + std::to_string(cr.var_count()) + ")");
  }
}

GraphSPNModel make_model(const Representation& rep, Variant variant, const StructureConfig& cfg,
                         int k, int N, std::vector<std::string> node_names,
                         std::vector<std::string> edge_names) {
  GraphSPNModel m;
  m.variant = variant;
  m.k = k;
  m.N = N;
  m.rep = rep;
  m.structure = cfg;
  m.node_names = std::move(node_names);
  m.edge_names = std::move(edge_names);
  if (variant == Variant::kary && (k < 1 || k > rep.m)) {
    throw ConfigError("kary needs 1 <= k <= m, got k=" + std::to_string(k));
  }
  if (N < 1) throw ConfigError("N must be at least 1");
  m.circuit = build_circuit(m.circuit_rep().variable_spec(), cfg);
  return m;
}

namespace {

void put_number(std::ostream& os, double x) {
  if (std::isnan(x)) {
    os << "nan";
  } else if (std::isinf(x)) {
    os << (x < 0 ? "-inf" : "inf");
  } else {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    os << buf;
  }
}

void put_matrix(std::ostream& os, const Eigen::MatrixXd& w) {
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      if (j) os << ' ';
      put_number(os, w(i, j));
    }
    os << '\n';
  }
}

template <typename Seq>
void put_list(std::ostream& os, const Seq& xs) {
  os << xs.size();
  for (const auto& x : xs) os << ' ' << x;
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::string word(const char* what) {
    std::string w;
    if (!(is_ >> w)) throw FormatError(std::string("model file truncated while reading ") + what);
    return w;
  }

  void expect(const std::string& kw) {
    const std::string w = word(kw.c_str());
    if (w != kw) throw FormatError("malformed model file: expected '" + kw + "', found '" + w + "'");
  }

  long long integer(const char* what) {
    const std::string w = word(what);
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(w.c_str(), &end, 10);
    if (errno || end == w.c_str() || *end) {
      throw FormatError(std::string("malformed integer for ") + what + ": '" + w + "'");
    }
    return v;
  }

  int count(const char* what, long long limit = 100000000) {
    const long long v = integer(what);
    if (v < 0 || v > limit) throw FormatError(std::string("implausible ") + what + ": " + std::to_string(v));
    return static_cast<int>(v);
  }

  double number(const char* what) {
    const std::string w = word(what);
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end == w.c_str() || *end) throw FormatError(std::string("malformed number for ") + what + ": '" + w + "'");
    return v;
  }

  Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols, const char* what) {
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = number(what);
    }
    return w;
  }

 private:
  std::istream& is_;
};

void check_rows(const Eigen::MatrixXd& logits, const std::string& where) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double z = logsumexp(logits.row(i));
    if (!std::isfinite(z) || logits.row(i).array().isNaN().any() ||
        (logits.row(i).array() == std::numeric_limits<double>::infinity()).any()) {
      throw FormatError("weight row " + std::to_string(i) + " of " + where + " cannot be normalized");
    }
  }
}

void write_layers(const Circuit& c, std::ostream& os) {
  os << "layers " << c.layers().size() << '\n';
  for (const auto& layer : c.layers()) {
    if (const auto* in = std::get_if<InputLayer>(&layer)) {
      os << "input " << in->units << ' ' << (in->normalized ? 1 : 0) << ' ';
      put_list(os, in->scope);
      os << '\n';
      for (const auto& t : in->logits) put_matrix(os, t);
    } else if (const auto* pr = std::get_if<ProductLayer>(&layer)) {
      os << "product " << (pr->kind == ProductKind::hadamard ? "hadamard" : "kronecker") << ' ';
      put_list(os, pr->children);
      os << '\n';
    } else {
      const auto& s = std::get<SumLayer>(layer);
      os << "sum " << s.logits.rows() << ' ';
      put_list(os, s.children);
      os << '\n';
      put_matrix(os, s.logits);
    }
  }
}

Circuit read_layers(Reader& rd, VariableSpec spec) {
  const int vars = static_cast<int>(spec.category_sizes.size());
  rd.expect("layers");
  const int n_layers = rd.count("layer count");
  std::vector<Layer> layers;
  std::vector<int> widths;
  layers.reserve(n_layers);
  for (int l = 0; l < n_layers; ++l) {
    const std::string kind = rd.word("layer kind");
    const std::string where = "layer " + std::to_string(l);
    if (kind == "input") {
      InputLayer in;
      in.units = rd.count("input units");
      in.normalized = rd.count("normalized flag", 1) == 1;
      const int n_scope = rd.count("scope size");
      for (int s = 0; s < n_scope; ++s) {
        const int var = rd.count("scope variable");
        if (var >= vars) throw FormatError(where + " scope variable out of range");
        in.scope.push_back(var);
      }
      for (int var : in.scope) {
        in.logits.push_back(rd.matrix(in.units, spec.category_sizes[var], "leaf logit"));
        if (in.normalized) check_rows(in.logits.back(), where);
      }
      widths.push_back(in.units);
      layers.emplace_back(std::move(in));
    } else if (kind == "product") {
      ProductLayer pr;
      const std::string pk = rd.word("product kind");
      if (pk == "hadamard") {
        pr.kind = ProductKind::hadamard;
      } else if (pk == "kronecker") {
        pr.kind = ProductKind::kronecker;
      } else {
        throw FormatError(where + ": unknown product kind '" + pk + "'");
      }
      const int nc = rd.count("child count");
      long long width = 1;
      for (int i = 0; i < nc; ++i) {
        const int ch = rd.count("child");
        if (ch >= l) throw FormatError(where + " refers to a later layer");
        pr.children.push_back(ch);
        width = pr.kind == ProductKind::hadamard ? widths[ch] : width * widths[ch];
        if (width > (1LL << 28)) throw FormatError(where + " is implausibly wide");
      }
      widths.push_back(static_cast<int>(width));
      layers.emplace_back(std::move(pr));
    } else if (kind == "sum") {
      SumLayer s;
      const int units = rd.count("sum units");
      const int nc = rd.count("child count");
      long long width = 0;
      for (int i = 0; i < nc; ++i) {
        const int ch = rd.count("child");
        if (ch >= l) throw FormatError(where + " refers to a later layer");
        s.children.push_back(ch);
        width += widths[ch];
      }
      s.logits = rd.matrix(units, width, "sum logit");
      check_rows(s.logits, where);
      widths.push_back(units);
      layers.emplace_back(std::move(s));
    } else {
      throw FormatError(where + ": unknown layer kind '" + kind + "'");
    }
  }
  try {
    return Circuit(std::move(spec), std::move(layers));
  } catch (const StructureError& e) {
    throw FormatError(std::string("file describes an invalid circuit: ") + e.what());
  }
}

}  // namespace

void serialize(const GraphSPNModel& m, std::ostream& os) {
  const Circuit& c = m.circuit;
  os << "GSPN " << kModelFormatVersion << '\n';
  os << "variables ";
  put_list(os, c.spec().category_sizes);
  os << '\n';
  os << "structure " << m.structure.n_layers << ' ' << m.structure.n_sum << ' '
     << m.structure.n_input << ' ' << m.structure.n_repetitions << ' ' << m.structure.structure_seed
     << '\n';
  os << "variant " << to_string(m.variant) << " k " << m.k << " N " << m.N << '\n';
  os << "representation " << m.rep.m << ' ' << m.rep.q << ' ' << m.rep.r << '\n';
  os << "node_names ";
  put_list(os, m.node_names);
  os << '\n';
  os << "edge_names ";
  put_list(os, m.edge_names);
  os << '\n';
  write_layers(c, os);
  os << "end\n";
}

std::string serialize(const GraphSPNModel& m) {
  std::ostringstream os;
  serialize(m, os);
  return os.str();
}

GraphSPNModel deserialize(std::istream& is) {
  Reader rd(is);
  const std::string magic = rd.word("magic");
  if (magic != "GSPN") throw FormatError("not a model file: bad magic '" + magic + "'");
  const long long version = rd.integer("format version");
  if (version != kModelFormatVersion) throw VersionError(static_cast<int>(version), kModelFormatVersion);

  GraphSPNModel m;
  rd.expect("variables");
  VariableSpec spec;
  const int vars = rd.count("variable count");
  for (int i = 0; i < vars; ++i) spec.category_sizes.push_back(rd.count("category size", 1 << 20));

  rd.expect("structure");
  m.structure.n_layers = rd.count("n_layers");
  m.structure.n_sum = rd.count("n_sum");
  m.structure.n_input = rd.count("n_input");
  m.structure.n_repetitions = rd.count("n_repetitions");
  {
    const std::string w = rd.word("structure seed");
    char* end = nullptr;
    m.structure.structure_seed = std::strtoull(w.c_str(), &end, 10);
    if (end == w.c_str() || *end) throw FormatError("malformed structure seed '" + w + "'");
  }

  rd.expect("variant");
  try {
    m.variant = parse_variant(rd.word("variant"));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  rd.expect("k");
  m.k = rd.count("k");
  rd.expect("N");
  m.N = rd.count("N", 1LL << 40);

  rd.expect("representation");
  m.rep.m = rd.count("m");
  m.rep.q = rd.count("q");
  m.rep.r = rd.count("r");

  rd.expect("node_names");
  const int nq = rd.count("node name count", 1 << 16);
  for (int i = 0; i < nq; ++i) m.node_names.push_back(rd.word("node name"));
  rd.expect("edge_names");
  const int nr = rd.count("edge name count", 1 << 16);
  for (int i = 0; i < nr; ++i) m.edge_names.push_back(rd.word("edge name"));

  m.circuit = read_layers(rd, std::move(spec));
  rd.expect("end");
  try {
    m.check();
  } catch (const Error& e) {
    throw FormatError(std::string("model metadata disagrees with its circuit: ") + e.what());
  }
  return m;
}

GraphSPNModel deserialize(const std::string& text) {
  std::istringstream is(text);
  return deserialize(is);
}

void save_model(const GraphSPNModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  serialize(m, os);
  if (!os) throw DataError("failed writing model to '" + path + "'");
}

GraphSPNModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open model file '" + path + "'");
  return deserialize(is);
}

void serialize_circuit(const Circuit& c, std::ostream& os) {
  os << "GSPC " << kModelFormatVersion << '\n';
  os << "variables ";
  put_list(os, c.spec().category_sizes);
  os << '\n';
  write_layers(c, os);
  os << "end\n";
}

Circuit deserialize_circuit(std::istream& is) {
  Reader rd(is);
  const std::string magic = rd.word("magic");
  if (magic != "GSPC") throw FormatError("not a circuit file: bad magic '" + magic + "'");
  const long long version = rd.integer("format version");
  if (version != kModelFormatVersion) throw VersionError(static_cast<int>(version), kModelFormatVersion);
  rd.expect("variables");
  VariableSpec spec;
  const int vars = rd.count("variable count");
  for (int i = 0; i < vars; ++i) spec.category_sizes.push_back(rd.count("category size", 1 << 20));
  Circuit c = read_layers(rd, std::move(spec));
  rd.expect("end");
  return c;
}

Circuit load_circuit(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open circuit file '" + path + "'");
  return deserialize_circuit(is);
}

}  // namespace gspn
