#include "tnfs/archive.hpp"

#include <json.hpp>

#include "tnfs/csv.hpp"
#include "tnfs/errors.hpp"

namespace tnfs {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

json terms_to_json(const std::vector<GaussianTerm>& terms) {
  json arr = json::array();
  for (const auto& t : terms) arr.push_back({{"center", t.center}, {"width", t.width}});
  return arr;
}

std::vector<GaussianTerm> terms_from_json(const json& j) {
  std::vector<GaussianTerm> out;
  for (const auto& t : j) out.push_back({t.at("center").get<double>(), t.at("width").get<double>()});
  return out;
}

}  // namespace

std::string to_string(Task task) { return task == Task::kPredict ? "predict" : "classify"; }

Task parse_task(const std::string& text) {
  if (text == "classify") return Task::kClassify;
  if (text == "predict") return Task::kPredict;
  throw InvalidArgument("unknown task '" + text + "' (expected classify or predict)");
}

std::string serialize_archive(const ModelArchive& a) {
  validate(a.model);
  json rules = json::array();
  for (const auto& r : a.model.rules) {
    rules.push_back({{"state_terms", terms_to_json(r.antecedent.state_terms)},
                     {"input_terms", terms_to_json(r.antecedent.input_terms)},
                     {"A", matrix_to_json(r.consequent.A)},
                     {"B", matrix_to_json(r.consequent.B)}});
  }
  json doc = {
      {"format", "tnfs-model"},
      {"format_version", a.format_version},
      {"task", to_string(a.task)},
      {"dimensions",
       {{"N", a.model.dims.state},
        {"M", a.model.dims.input},
        {"P", a.model.dims.output},
        {"R", a.model.rules.size()}}},
      {"rules", rules},
      {"C", matrix_to_json(a.model.C)},
      {"x0", a.model.x0},
      {"normalization",
       {{"names", a.normalization.names},
        {"mean", a.normalization.mean},
        {"std", a.normalization.std}}},
      {"class_names", a.class_names},
      {"input_channels", a.input_channels},
      {"output_channels", a.output_channels},
      {"step_minutes", a.step_minutes},
      {"window",
       {{"window_minutes", a.window.window_minutes},
        {"stride_minutes", a.window.stride_minutes}}},
      {"provenance",
       {{"seed", a.provenance.seed}, {"config_digest", a.provenance.config_digest}}},
  };
  return doc.dump(2) + "\n";
}

ModelArchive parse_archive(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("model archive is not valid JSON: ") + e.what());
  }
  try {
    if (doc.value("format", std::string{}) != "tnfs-model") {
      throw InvalidArgument("not a tnfs model archive");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kArchiveFormatVersion) {
      throw VersionMismatch("model archive format_version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kArchiveFormatVersion) + ")");
    }
    ModelArchive a;
    a.format_version = version;
    a.task = parse_task(doc.at("task").get<std::string>());
    const auto& dims = doc.at("dimensions");
    a.model.dims = {dims.at("N").get<std::size_t>(), dims.at("M").get<std::size_t>(),
                    dims.at("P").get<std::size_t>()};
    for (const auto& r : doc.at("rules")) {
      Rule rule;
      rule.antecedent.state_terms = terms_from_json(r.at("state_terms"));
      rule.antecedent.input_terms = terms_from_json(r.at("input_terms"));
      rule.consequent.A = matrix_from_json(r.at("A"));
      rule.consequent.B = matrix_from_json(r.at("B"));
      a.model.rules.push_back(std::move(rule));
    }
    if (a.model.rules.size() != dims.at("R").get<std::size_t>()) {
      throw InvalidArgument("model archive declares R = " + dims.at("R").dump() + " but lists " +
                            std::to_string(a.model.rules.size()) + " rules");
    }
    a.model.C = matrix_from_json(doc.at("C"));
    a.model.x0 = doc.at("x0").get<Vector>();
    validate(a.model);
    const auto& norm = doc.at("normalization");
    a.normalization.names = norm.at("names").get<std::vector<std::string>>();
    a.normalization.mean = norm.at("mean").get<Vector>();
    a.normalization.std = norm.at("std").get<Vector>();
    a.class_names = doc.at("class_names").get<std::vector<std::string>>();
    a.input_channels = doc.at("input_channels").get<std::vector<std::string>>();
    a.output_channels = doc.at("output_channels").get<std::vector<std::string>>();
    a.step_minutes = doc.at("step_minutes").get<double>();
    a.window.window_minutes = doc.at("window").at("window_minutes").get<double>();
    a.window.stride_minutes = doc.at("window").at("stride_minutes").get<double>();
    a.provenance.seed = doc.at("provenance").at("seed").get<std::uint64_t>();
    a.provenance.config_digest = doc.at("provenance").at("config_digest").get<std::string>();
    return a;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed model archive: ") + e.what());
  }
}

void save_archive(const std::filesystem::path& path, const ModelArchive& archive) {
  write_text_atomic(path, serialize_archive(archive));
}

ModelArchive load_archive(const std::filesystem::path& path) {
  return parse_archive(read_text(path));
}

}  // namespace tnfs
