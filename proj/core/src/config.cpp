#include "tnfs/config.hpp"

#include <cstdio>
#include <json.hpp>

#include "tnfs/csv.hpp"
#include "tnfs/errors.hpp"
#include "tnfs/seed.hpp"

namespace tnfs {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string(what) + " is not valid JSON: " + e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void check_catalog(const FaultCatalog& catalog, const std::vector<SensorSpec>& plant) {
  for (const auto& f : catalog.faults) {
    if (f.affected_channels.empty()) {
      throw InvalidArgument("fault " + f.fault_id + " has no affected channels");
    }
    for (const auto& e : f.affected_channels) {
      bool known = false;
      for (const auto& s : plant) known = known || s.name == e.channel;
      if (!known) {
        throw InvalidArgument("fault " + f.fault_id + " references unknown channel " + e.channel);
      }
    }
  }
}

}  // namespace

std::vector<SensorSpec> parse_plant(std::string_view text) {
  const json doc = parse_json(text, "plant spec");
  try {
    std::vector<SensorSpec> plant;
    for (const auto& s : doc.at("sensors")) {
      SensorSpec spec{s.at("name").get<std::string>(), s.value("unit", std::string{}),
                      s.at("nominal_mean").get<double>(), s.at("nominal_std").get<double>(),
                      s.at("noise_std").get<double>()};
      if (spec.nominal_std < 0.0 || spec.noise_std < 0.0) {
        throw InvalidArgument("sensor " + spec.name + ": standard deviations must be >= 0");
      }
      plant.push_back(std::move(spec));
    }
    if (plant.empty()) throw InvalidArgument("plant spec lists no sensors");
    return plant;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed plant spec: ") + e.what());
  }
}

std::string serialize_plant(const std::vector<SensorSpec>& plant) {
  json arr = json::array();
  for (const auto& s : plant) {
    arr.push_back({{"name", s.name},
                   {"unit", s.unit},
                   {"nominal_mean", s.nominal_mean},
                   {"nominal_std", s.nominal_std},
                   {"noise_std", s.noise_std}});
  }
  return json{{"sensors", arr}}.dump(2) + "\n";
}

FaultCatalog parse_fault_catalog(std::string_view text) {
  const json doc = parse_json(text, "fault catalog");
  try {
    FaultCatalog cat;
    for (const auto& f : doc.at("faults")) {
      FaultSpec spec;
      spec.fault_id = f.at("id").get<std::string>();
      spec.mode = parse_fault_mode(f.value("mode", std::string("abrupt")));
      spec.magnitude = f.at("magnitude").get<double>();
      for (const auto& c : f.at("channels")) {
        spec.affected_channels.push_back({c.at("name").get<std::string>(), c.value("gain", 1.0)});
      }
      cat.faults.push_back(std::move(spec));
    }
    return cat;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed fault catalog: ") + e.what());
  }
}

std::string serialize_fault_catalog(const FaultCatalog& catalog) {
  json arr = json::array();
  for (const auto& f : catalog.faults) {
    json channels = json::array();
    for (const auto& c : f.affected_channels) channels.push_back({{"name", c.channel}, {"gain", c.gain}});
    arr.push_back({{"id", f.fault_id},
                   {"mode", to_string(f.mode)},
                   {"magnitude", f.magnitude},
                   {"channels", channels}});
  }
  return json{{"faults", arr}}.dump(2) + "\n";
}

RunConfig default_run_config(std::uint64_t seed) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.plant = default_plant();
  cfg.catalog = default_fault_catalog();
  cfg.classes = default_class_table();
  cfg.scenarios = make_scenarios(cfg.catalog, cfg.classes, 3, 40.0, 120.0, 10.0,
                                 derive_seed(seed, "scenarios"));
  cfg.cluster.fcm.seed = derive_seed(seed, "fcm");
  cfg.train.shuffle_seed = derive_seed(seed, "train");
  cfg.digest = hex64(fnv1a64("default"));
  return cfg;
}

RunConfig parse_run_config(std::string_view text, const fs::path& base_dir,
                           std::optional<std::uint64_t> seed_override) {
  const json doc = parse_json(text, "run config");
  try {
    const std::uint64_t seed = seed_override ? *seed_override : doc.value("seed", std::uint64_t{0});
    RunConfig cfg = default_run_config(seed);
    cfg.digest = hex64(fnv1a64(text));

    if (doc.contains("plant")) {
      cfg.plant = parse_plant(read_text(resolve(base_dir, doc.at("plant").get<std::string>())));
    }
    if (doc.contains("fault_catalog")) {
      cfg.catalog = parse_fault_catalog(
          read_text(resolve(base_dir, doc.at("fault_catalog").get<std::string>())));
    }
    check_catalog(cfg.catalog, cfg.plant);
    if (doc.contains("classes")) {
      cfg.classes.names = doc.at("classes").get<std::vector<std::string>>();
    }
    if (!cfg.classes.find(kNormalFault)) {
      throw InvalidArgument("class table must contain " + kNormalFault);
    }
    for (const auto& name : cfg.classes.names) {
      if (name != kNormalFault) cfg.catalog.get(name);
    }

    const json sc = doc.value("scenarios", json::object());
    const double duration = doc.value("duration_minutes", sc.is_object() ? sc.value("duration_minutes", 120.0) : 120.0);
    const double step = doc.value("step_minutes", sc.is_object() ? sc.value("step_minutes", 10.0) : 10.0);
    const std::uint64_t scenario_seed = derive_seed(seed, "scenarios");
    if (sc.is_array()) {
      cfg.scenarios.clear();
      for (const auto& item : sc) {
        const std::string fault = item.at("fault").get<std::string>();
        const std::size_t count = item.value("count", std::size_t{1});
        for (std::size_t k = 0; k < count; ++k) {
          Scenario s;
          s.duration_minutes = item.value("duration_minutes", duration);
          s.step_minutes = item.value("step_minutes", step);
          if (fault != kNormalFault) {
            s.fault = cfg.catalog.get(fault);
            s.fault.onset_minute = item.value("onset_minute", 40.0);
            if (item.contains("mode")) s.fault.mode = parse_fault_mode(item.at("mode").get<std::string>());
            if (item.contains("magnitude")) s.fault.magnitude = item.at("magnitude").get<double>();
          }
          s.seed = derive_seed(scenario_seed, "scenario/" + std::to_string(cfg.scenarios.size()));
          validate(s);
          cfg.scenarios.push_back(std::move(s));
        }
      }
    } else {
      cfg.scenarios = make_scenarios(cfg.catalog, cfg.classes, sc.value("per_class", std::size_t{3}),
                                     sc.value("onset_minute", 40.0), duration, step, scenario_seed);
      for (const auto& s : cfg.scenarios) validate(s);
    }
    if (cfg.scenarios.empty()) throw InvalidArgument("run config defines no scenarios");

    if (doc.contains("window")) {
      const auto& w = doc.at("window");
      cfg.window.window_minutes = w.value("window_minutes", cfg.window.window_minutes);
      cfg.window.stride_minutes = w.value("stride_minutes", cfg.window.stride_minutes);
    }
    if (doc.contains("split")) {
      const auto& s = doc.at("split");
      cfg.split = {s.value("train", cfg.split.train), s.value("validation", cfg.split.validation),
                   s.value("test", cfg.split.test)};
    }
    if (doc.contains("model")) {
      const auto& m = doc.at("model");
      cfg.model.task = parse_task(m.value("task", std::string("classify")));
      cfg.model.state_dim = m.value("state_dim", std::size_t{0});
      cfg.model.input_channels = m.value("input_channels", std::vector<std::string>{});
      cfg.model.output_channels = m.value("output_channels", std::vector<std::string>{});
    }
    if (doc.contains("cluster")) {
      const auto& c = doc.at("cluster");
      if (c.contains("count")) cfg.cluster.count = c.at("count").get<std::size_t>();
      if (c.contains("range")) {
        const auto r = c.at("range").get<std::vector<std::size_t>>();
        if (r.size() != 2) throw InvalidArgument("cluster.range must be [min, max]");
        cfg.cluster.range_min = r[0];
        cfg.cluster.range_max = r[1];
      }
      cfg.cluster.fcm.fuzzifier_m = c.value("fuzzifier_m", cfg.cluster.fcm.fuzzifier_m);
      cfg.cluster.fcm.tolerance = c.value("tolerance", cfg.cluster.fcm.tolerance);
      cfg.cluster.fcm.max_iterations = c.value("max_iterations", cfg.cluster.fcm.max_iterations);
      cfg.cluster.min_width = c.value("min_width", cfg.cluster.min_width);
    }
    if (cfg.cluster.count) cfg.cluster.fcm.cluster_count = *cfg.cluster.count;
    validate(cfg.cluster.fcm);
    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      if (t.contains("grad_clip_norm")) {
        if (t.at("grad_clip_norm").is_null()) {
          cfg.train.grad_clip_norm.reset();
        } else {
          cfg.train.grad_clip_norm = t.at("grad_clip_norm").get<double>();
        }
      }
      cfg.train.validation_fraction = t.value("validation_fraction", cfg.train.validation_fraction);
      cfg.train.train_output_matrix = t.value("train_output_matrix", cfg.train.train_output_matrix);
    }
    validate(cfg.train);
    return cfg;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed run config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  return parse_run_config(read_text(path), path.parent_path(), seed_override);
}

}  // namespace tnfs
