#include "sgan/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace sgan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  for (char ch : key)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) return false;
  return key.find("..") == std::string::npos;
}

/// Removes a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

ConfigValue parse_value(const std::string& raw, int line_no) {
  auto fail = [&](const std::string& why) -> ConfigValue {
    throw UsageError("config line " + std::to_string(line_no) + ": " + why);
  };
  if (raw.empty()) return fail("missing value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') return fail("unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 2 < raw.size()) {
        const char next = raw[++i];
        out += next == 'n' ? '\n' : next == 't' ? '\t' : next;
      } else {
        out += raw[i];
      }
    }
    return out;
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  std::string digits;
  for (char ch : raw)
    if (ch != '_') digits += ch;
  std::int64_t i = 0;
  auto [pi, ei] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
  if (ei == std::errc() && pi == digits.data() + digits.size()) return i;
  double d = 0;
  auto [pd, ed] = std::from_chars(digits.data(), digits.data() + digits.size(), d);
  if (ed == std::errc() && pd == digits.data() + digits.size()) return d;
  return fail("cannot parse value '" + raw + "'");
}

std::int64_t as_int(const std::string& key, const ConfigValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* s = std::get_if<std::string>(&v)) {
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), out);
    if (ec == std::errc() && p == s->data() + s->size()) return out;
  }
  throw UsageError("config key '" + key + "' expects an integer");
}

double as_double(const std::string& key, const ConfigValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return double(*i);
  if (const auto* s = std::get_if<std::string>(&v)) {
    double out = 0;
    auto [p, ec] = std::from_chars(s->data(), s->data() + s->size(), out);
    if (ec == std::errc() && p == s->data() + s->size()) return out;
  }
  throw UsageError("config key '" + key + "' expects a number");
}

bool as_bool(const std::string& key, const ConfigValue& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  if (const auto* s = std::get_if<std::string>(&v)) {
    if (*s == "true") return true;
    if (*s == "false") return false;
  }
  throw UsageError("config key '" + key + "' expects true or false");
}

std::string as_string(const std::string& key, const ConfigValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw UsageError("config key '" + key + "' expects a string");
}

std::vector<MaskKind> parse_kind_list(const std::string& text) {
  std::vector<MaskKind> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_mask_kind(item));
  }
  return out;
}

std::string join_kinds(const std::vector<MaskKind>& kinds) {
  std::string out;
  for (std::size_t i = 0; i < kinds.size(); ++i) out += (i ? "," : "") + std::string(to_string(kinds[i]));
  return out;
}

}  // namespace

ConfigTable parse_config(const std::string& text) {
  ConfigTable table;
  std::stringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError("config line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) throw UsageError("config line " + std::to_string(line_no) + ": bad section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw UsageError("config line " + std::to_string(line_no) + ": bad key '" + key + "'");
    if (!section.empty()) key = section + "." + key;
    if (table.count(key)) throw UsageError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    table[key] = parse_value(trim(line.substr(eq + 1)), line_no);
  }
  return table;
}

ConfigTable read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (path.extension() != ".json") return parse_config(buf.str());
  // A resolved-config JSON written by an earlier run.
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw DataError("malformed JSON config " + path.string() + ": " + e.what());
  }
  ConfigTable table;
  for (const auto& [key, v] : doc.items()) {
    if (v.is_boolean()) table[key] = v.get<bool>();
    else if (v.is_number_integer()) table[key] = v.get<std::int64_t>();
    else if (v.is_number()) table[key] = v.get<double>();
    else if (v.is_string()) table[key] = v.get<std::string>();
    else throw DataError("config key '" + key + "' has an unsupported JSON type");
  }
  return table;
}

void RunConfig::set(const std::string& key, const ConfigValue& v) {
  if (key == "seed") seed = std::uint64_t(as_int(key, v));
  else if (key == "resolution") resolution = as_int(key, v);
  else if (key == "train.batch_size") train.batch_size = as_int(key, v);
  else if (key == "train.learning_rate") train.learning_rate = as_double(key, v);
  else if (key == "train.beta1") train.beta1 = as_double(key, v);
  else if (key == "train.beta2") train.beta2 = as_double(key, v);
  else if (key == "train.iterations") train.iterations = long(as_int(key, v));
  else if (key == "train.latent_dim") train.latent_dim = as_int(key, v);
  else if (key == "train.base_filters") train.base_filters = as_int(key, v);
  else if (key == "train.max_filters") train.max_filters = as_int(key, v);
  else if (key == "train.checkpoint_every") train.checkpoint_every = long(as_int(key, v));
  else if (key == "train.log_every") train.log_every = long(as_int(key, v));
  else if (key == "inpaint.eta") inpaint.eta = as_double(key, v);
  else if (key == "inpaint.learning_rate") inpaint.learning_rate = as_double(key, v);
  else if (key == "inpaint.iterations") inpaint.iterations = long(as_int(key, v));
  else if (key == "inpaint.beta1") inpaint.beta1 = as_double(key, v);
  else if (key == "inpaint.beta2") inpaint.beta2 = as_double(key, v);
  else if (key == "inpaint.z_min") inpaint.z_min = as_double(key, v);
  else if (key == "inpaint.z_max") inpaint.z_max = as_double(key, v);
  else if (key == "inpaint.restarts") inpaint.restarts = int(as_int(key, v));
  else if (key == "inpaint.normalize_contextual") inpaint.normalize_contextual = as_bool(key, v);
  else if (key == "mask.kind") mask = parse_mask_kind(as_string(key, v));
  else if (key == "mask.fraction") mask_fraction = as_double(key, v);
  else if (key == "eval.kinds") eval_kinds = parse_kind_list(as_string(key, v));
  else if (key == "eval.n") n = int(as_int(key, v));
  else if (key == "eval.jobs") jobs = int(as_int(key, v));
  else if (key == "paths.dataset") dataset = as_string(key, v);
  else if (key == "paths.checkpoint") checkpoint = as_string(key, v);
  else if (key == "paths.out") out = as_string(key, v);
  else throw UsageError("unknown config key '" + key + "'");
}

void RunConfig::merge(const ConfigTable& table) {
  for (const auto& [key, value] : table) set(key, value);
}

void RunConfig::resolve() {
  if (resolution != 32 && resolution != 64 && resolution != 128)
    throw UsageError("resolution must be 32, 64 or 128");
  if (jobs < 1) throw UsageError("jobs must be at least 1");
  train.seed = seed;
  train.resolution = resolution;
  train.dataset_root = dataset;
  train.out_dir = out;
  inpaint.seed = seed;
  if (eval_kinds.empty()) eval_kinds = {MaskKind::Central, MaskKind::Freehand, MaskKind::Left};
}

json RunConfig::to_json() const {
  return {{"seed", seed},
          {"resolution", resolution},
          {"train.batch_size", train.batch_size},
          {"train.learning_rate", train.learning_rate},
          {"train.beta1", train.beta1},
          {"train.beta2", train.beta2},
          {"train.iterations", train.iterations},
          {"train.latent_dim", train.latent_dim},
          {"train.base_filters", train.base_filters},
          {"train.max_filters", train.max_filters},
          {"train.checkpoint_every", train.checkpoint_every},
          {"train.log_every", train.log_every},
          {"inpaint.eta", inpaint.eta},
          {"inpaint.learning_rate", inpaint.learning_rate},
          {"inpaint.iterations", inpaint.iterations},
          {"inpaint.beta1", inpaint.beta1},
          {"inpaint.beta2", inpaint.beta2},
          {"inpaint.z_min", inpaint.z_min},
          {"inpaint.z_max", inpaint.z_max},
          {"inpaint.restarts", inpaint.restarts},
          {"inpaint.normalize_contextual", inpaint.normalize_contextual},
          {"mask.kind", std::string(to_string(mask))},
          {"mask.fraction", mask_fraction},
          {"eval.kinds", join_kinds(eval_kinds)},
          {"eval.n", n},
          {"eval.jobs", jobs},
          {"paths.dataset", dataset.string()},
          {"paths.checkpoint", checkpoint.string()},
          {"paths.out", out.string()}};
}

void write_resolved_config(const RunConfig& cfg, const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(dir / name, std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / name).string());
  out << cfg.to_json().dump(2) << '\n';
}

}  // namespace sgan
