#include "tnfs/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "tnfs/errors.hpp"

namespace tnfs {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto line : split(text, '\n')) {
    line = trim(line);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

const std::string& require(const Record& r, const std::string& key) {
  auto it = r.find(key);
  if (it == r.end()) throw InvalidArgument("record is missing key '" + key + "'");
  return it->second;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(n));
}

double parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InvalidArgument("cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

void write_text_atomic(const fs::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_trajectory_csv(const Trajectory& t) {
  std::string out = "minute";
  for (const auto& name : t.channel_names) out += "," + name;
  out += "\n";
  for (std::size_t k = 0; k < t.length(); ++k) {
    out += format_double(t.timestamps[k]);
    for (const auto& ch : t.channels) out += "," + format_double(ch[k]);
    out += "\n";
  }
  return out;
}

Trajectory parse_trajectory_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw InvalidArgument("trajectory CSV is empty");
  const auto header = split(lines.front(), ',');
  if (trim(header.front()) != "minute") {
    throw InvalidArgument("trajectory CSV header must start with 'minute'");
  }
  Trajectory t;
  for (std::size_t i = 1; i < header.size(); ++i) t.channel_names.emplace_back(trim(header[i]));
  t.channels.resize(t.channel_names.size());
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto cells = split(lines[l], ',');
    if (cells.size() != header.size()) {
      throw InvalidArgument("trajectory CSV row " + std::to_string(l) + " has " +
                            std::to_string(cells.size()) + " fields, header has " +
                            std::to_string(header.size()));
    }
    t.timestamps.push_back(parse_double(cells[0]));
    for (std::size_t c = 1; c < cells.size(); ++c) t.channels[c - 1].push_back(parse_double(cells[c]));
  }
  return t;
}

void write_trajectory_csv(const fs::path& path, const Trajectory& trajectory) {
  write_text_atomic(path, format_trajectory_csv(trajectory));
}

Trajectory read_trajectory_csv(const fs::path& path) {
  try {
    return parse_trajectory_csv(read_text(path));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

std::string format_record(const std::vector<std::pair<std::string, std::string>>& fields) {
  std::string out;
  for (const auto& [k, v] : fields) {
    if (!out.empty()) out += ' ';
    out += k + "=" + v;
  }
  return out;
}

Record parse_record(std::string_view line) {
  Record r;
  for (auto token : split(trim(line), ' ')) {
    if (token.empty()) continue;
    const auto eq = token.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument("record token '" + std::string(token) + "' is not key=value");
    }
    r.emplace(std::string(token.substr(0, eq)), std::string(token.substr(eq + 1)));
  }
  return r;
}

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out = "# tnfs scenario manifest\n";
  for (const auto& e : entries) {
    const auto& f = e.scenario.fault;
    std::string channels;
    for (const auto& c : f.affected_channels) {
      if (!channels.empty()) channels += ';';
      channels += c.channel + ":" + format_double(c.gain);
    }
    std::vector<std::pair<std::string, std::string>> fields = {
        {"file", e.file},
        {"fault", f.fault_id},
        {"mode", to_string(f.mode)},
        {"onset", format_double(f.onset_minute)},
        {"magnitude", format_double(f.magnitude)},
        {"channels", channels.empty() ? "-" : channels},
        {"duration", format_double(e.scenario.duration_minutes)},
        {"step", format_double(e.scenario.step_minutes)},
        {"seed", std::to_string(e.scenario.seed)},
    };
    out += format_record(fields) + "\n";
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  std::vector<ManifestEntry> out;
  for (auto line : lines_of(text)) {
    if (line.front() == '#') continue;
    const Record r = parse_record(line);
    ManifestEntry e;
    e.file = require(r, "file");
    auto& f = e.scenario.fault;
    f.fault_id = require(r, "fault");
    f.mode = parse_fault_mode(require(r, "mode"));
    f.onset_minute = parse_double(require(r, "onset"));
    f.magnitude = parse_double(require(r, "magnitude"));
    const std::string& channels = require(r, "channels");
    if (channels != "-") {
      for (auto item : split(channels, ';')) {
        const auto colon = item.rfind(':');
        if (colon == std::string_view::npos) {
          throw InvalidArgument("manifest channel entry '" + std::string(item) + "' lacks a gain");
        }
        f.affected_channels.push_back(
            {std::string(item.substr(0, colon)), parse_double(item.substr(colon + 1))});
      }
    }
    e.scenario.duration_minutes = parse_double(require(r, "duration"));
    e.scenario.step_minutes = parse_double(require(r, "step"));
    e.scenario.seed = std::stoull(require(r, "seed"));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Trajectory> load_trajectories(const fs::path& dir) {
  const auto entries = parse_manifest(read_text(dir / kManifestName));
  if (entries.empty()) throw InvalidArgument("manifest in " + dir.string() + " lists no scenarios");
  std::vector<Trajectory> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    Trajectory t = read_trajectory_csv(dir / e.file);
    t.fault = e.scenario.fault;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace tnfs
