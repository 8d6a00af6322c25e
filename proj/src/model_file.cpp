#include "specdraft/model_file.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "specdraft/error.hpp"
#include "specdraft/ssm_drafter.hpp"
#include "specdraft/tabular_model.hpp"

namespace specdraft {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

const json& field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) fail(ErrorKind::kParse, std::string("missing field '") + name + "'");
  return *it;
}

template <typename T>
T get_as(const json& obj, const char* name) {
  try {
    return field(obj, name).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("field '") + name + "': " + e.what());
  }
}

std::vector<double> flatten_matrix(const json& obj, const char* name, std::size_t rows,
                                   std::size_t cols) {
  const json& m = field(obj, name);
  if (!m.is_array() || m.size() != rows) {
    fail(ErrorKind::kParse, std::string("'") + name + "' must have " + std::to_string(rows) + " rows");
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const json& r : m) {
    if (!r.is_array() || r.size() != cols) {
      fail(ErrorKind::kParse,
           std::string("rows of '") + name + "' must have " + std::to_string(cols) + " entries");
    }
    for (const json& x : r) {
      if (!x.is_number()) fail(ErrorKind::kParse, std::string("non-numeric entry in '") + name + "'");
      out.push_back(x.get<double>());
    }
  }
  return out;
}

json matrix_json(std::span<const double> flat, std::size_t rows, std::size_t cols) {
  json m = json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    m.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                    flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
  }
  return m;
}

std::shared_ptr<const Model> parse_tabular(const json& doc, double temperature) {
  const auto vocab = get_as<std::size_t>(doc, "vocab_size");
  const auto order = get_as<std::size_t>(doc, "order");
  if (doc.contains("rows")) {
    std::size_t contexts = 1;
    for (std::size_t i = 1; i < order; ++i) contexts *= vocab + 1;
    return std::make_shared<TabularModel>(vocab, order, flatten_matrix(doc, "rows", contexts, vocab),
                                          temperature);
  }
  if (doc.contains("generator")) {
    const json& g = doc["generator"];
    TabularGenerator gen;
    gen.seed = get_as<std::uint64_t>(g, "seed");
    gen.concentration = get_as<double>(g, "concentration");
    if (g.contains("perturb")) {
      const json& p = g["perturb"];
      gen.perturb = RowPerturbation{get_as<std::uint64_t>(p, "seed"),
                                    get_as<double>(p, "concentration"), get_as<double>(p, "weight")};
    }
    return std::make_shared<TabularModel>(TabularModel::generate(vocab, order, gen, temperature));
  }
  fail(ErrorKind::kParse, "tabular model needs 'rows' or 'generator'");
}

std::shared_ptr<const Model> parse_ssm(const json& doc, double temperature) {
  const auto vocab = get_as<std::size_t>(doc, "vocab_size");
  const auto dim = get_as<std::size_t>(doc, "state_dim");
  if (doc.contains("parameters")) {
    const json& p = doc["parameters"];
    SsmParameters params;
    params.vocab_size = vocab;
    params.state_dim = dim;
    params.decay = get_as<std::vector<double>>(p, "decay");
    params.embedding = flatten_matrix(p, "embedding", vocab, dim);
    params.gate = flatten_matrix(p, "gate", vocab, dim);
    params.output = flatten_matrix(p, "output", vocab, dim);
    return std::make_shared<SsmDrafter>(std::move(params), temperature);
  }
  if (doc.contains("generator")) {
    const json& g = doc["generator"];
    SsmGenerator gen;
    gen.seed = get_as<std::uint64_t>(g, "seed");
    if (g.contains("output_scale")) gen.output_scale = get_as<double>(g, "output_scale");
    return std::make_shared<SsmDrafter>(SsmDrafter::generate(vocab, dim, gen, temperature));
  }
  fail(ErrorKind::kParse, "ssm model needs 'parameters' or 'generator'");
}

}  // namespace

std::shared_ptr<const Model> parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::kParse, "model file must hold a JSON object");
  const int version = get_as<int>(doc, "format_version");
  if (version != kFormatVersion) {
    fail(ErrorKind::kUnsupportedVersion, "format_version " + std::to_string(version));
  }
  const double temperature = doc.contains("temperature") ? get_as<double>(doc, "temperature") : 1.0;
  const auto kind = get_as<std::string>(doc, "kind");
  if (kind == "tabular") return parse_tabular(doc, temperature);
  if (kind == "ssm") return parse_ssm(doc, temperature);
  fail(ErrorKind::kParse, "unknown model kind '" + kind + "'");
}

std::shared_ptr<const Model> load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open model file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str());
}

std::string serialize_model(const Model& model) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["kind"] = std::string(model.kind());
  doc["vocab_size"] = model.vocab_size();
  if (const auto* tab = dynamic_cast<const TabularModel*>(&model)) {
    doc["order"] = tab->order();
    doc["rows"] = matrix_json(tab->rows(), tab->context_count(), tab->vocab_size());
  } else if (const auto* ssm = dynamic_cast<const SsmDrafter*>(&model)) {
    const SsmParameters& p = ssm->parameters();
    doc["state_dim"] = p.state_dim;
    doc["temperature"] = ssm->temperature();
    doc["parameters"] = {{"decay", p.decay},
                         {"embedding", matrix_json(p.embedding, p.vocab_size, p.state_dim)},
                         {"gate", matrix_json(p.gate, p.vocab_size, p.state_dim)},
                         {"output", matrix_json(p.output, p.vocab_size, p.state_dim)}};
  } else {
    fail(ErrorKind::kInvalidArgument, "cannot serialize model kind " + std::string(model.kind()));
  }
  return doc.dump(1);
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write model file " + path.string());
  out << serialize_model(model) << '\n';
  if (!out) fail(ErrorKind::kIo, "failed writing model file " + path.string());
}

}  // namespace specdraft
