#include "vn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "vn/error.hpp"

namespace vn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expect) {
  fail(ErrorCode::Config, "key '" + key + "' expects " + expect + ", got '" + value + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "an unsigned integer");
  return v;
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    bad_value(key, value, "a number");
  }
  if (used != value.size()) bad_value(key, value, "a number");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_u64(key, trim(item)));
  return out;
}

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(17);
  o << v;
  return o.str();
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

template <class T>
Field count(const std::string& key, T& ref) {
  return {[&ref, key](const std::string& v) { ref = static_cast<T>(to_u64(key, v)); },
          [&ref] { return std::to_string(ref); }};
}

Field real(const std::string& key, double& ref) {
  return {[&ref, key](const std::string& v) { ref = to_double(key, v); }, [&ref] { return fmt(ref); }};
}

Field flag(const std::string& key, bool& ref) {
  return {[&ref, key](const std::string& v) { ref = to_bool(key, v); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

Field text(std::string& ref) {
  return {[&ref](const std::string& v) { ref = v; }, [&ref] { return ref; }};
}

// Ordered as written by to_text.
std::vector<std::pair<std::string, Field>> fields(RunConfig& c) {
  NetworkSpec& n = c.net;
  TrainConfig& t = c.train;
  return {
      {"variant", {[&n](const std::string& v) { n.variant = parse_variant(v); }, [&n] { return to_string(n.variant); }}},
      {"dilated_stride", count("dilated_stride", n.dilated_stride)},
      {"multigrid", flag("multigrid", n.multigrid)},
      {"norm", {[&n](const std::string& v) { n.norm = parse_norm_kind(v); }, [&n] { return to_string(n.norm); }}},
      {"context", {[&n](const std::string& v) { n.context = parse_context(v); }, [&n] { return to_string(n.context); }}},
      {"in_channels", count("in_channels", n.in_channels)},
      {"base_width", count("base_width", n.base_width)},
      {"dilated_width", count("dilated_width", n.dilated_width)},
      {"psp_bins", {[&n](const std::string& v) { n.psp_bins = to_list("psp_bins", v); }, [&n] { return join(n.psp_bins); }}},
      {"aspp_rates", {[&n](const std::string& v) { n.aspp_rates = to_list("aspp_rates", v); }, [&n] { return join(n.aspp_rates); }}},
      {"init_seed", count("init_seed", n.init_seed)},
      {"patch", count("patch", t.patch)},
      {"batch", count("batch", t.batch)},
      {"max_steps", count("max_steps", t.max_steps)},
      {"lr0", real("lr0", t.lr0)},
      {"poly_power", real("poly_power", t.poly_power)},
      {"weight_decay", real("weight_decay", t.weight_decay)},
      {"clip_norm", real("clip_norm", t.clip_norm)},
      {"adam_beta1", real("adam_beta1", t.adam_beta1)},
      {"adam_beta2", real("adam_beta2", t.adam_beta2)},
      {"adam_eps", real("adam_eps", t.adam_eps)},
      {"seed", count("seed", t.seed)},
      {"log_every", count("log_every", t.log_every)},
      {"checkpoint_every", count("checkpoint_every", t.checkpoint_every)},
      {"hflip", flag("hflip", t.augment.hflip)},
      {"vflip", flag("vflip", t.augment.vflip)},
      {"rotate", flag("rotate", t.augment.rotate)},
      {"max_shift", count("max_shift", t.augment.max_shift)},
      {"data", text(c.data)},
      {"eval_data", text(c.eval_data)},
      {"threshold", real("threshold", c.threshold)},
      {"eval_patch", count("eval_patch", c.tiles.patch)},
      {"eval_stride", count("eval_stride", c.tiles.stride)},
      {"eval_batch", count("eval_batch", c.tiles.batch)},
      {"synth_images", count("synth_images", c.synth_images)},
      {"synth_size", count("synth_size", c.synth_size)},
      {"synth_seed", count("synth_seed", c.synth_seed)},
      {"ablate_variants", text(c.ablate_variants)},
  };
}

}  // namespace

void RunConfig::validate() const {
  net.validate();
  train.validate();
  if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorCode::Config, "threshold must lie in (0, 1)");
  if (tiles.patch == 0 || tiles.stride == 0 || tiles.batch == 0) {
    fail(ErrorCode::Config, "eval_patch, eval_stride and eval_batch must be positive");
  }
  if (tiles.stride > tiles.patch) fail(ErrorCode::Config, "eval_stride larger than eval_patch leaves gaps");
  if (tiles.patch % net.output_stride() != 0) {
    fail(ErrorCode::Config, "eval_patch " + std::to_string(tiles.patch) + " is not divisible by output stride " +
                                std::to_string(net.output_stride()));
  }
  if (data.empty() && (synth_images == 0 || synth_size < train.patch)) {
    fail(ErrorCode::Config, "generated data needs synth_images >= 1 and synth_size >= patch");
  }
}

RunConfig parse_run_config(const std::string& body, const std::string& source) {
  RunConfig c;
  auto table = fields(c);
  std::map<std::string, Field*> by_key;
  for (auto& [k, f] : table) by_key[k] = &f;
  std::set<std::string> seen;

  std::istringstream in(body);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Config, where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) fail(ErrorCode::Config, where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) fail(ErrorCode::Config, where + "key '" + key + "' given twice");
    try {
      it->second->set(value);
    } catch (const Error& e) {
      fail(ErrorCode::Config, where + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open config '" + path + "'");
  std::ostringstream body;
  body << in.rdbuf();
  return parse_run_config(body.str(), path);
}

std::string to_text(const RunConfig& config) {
  RunConfig copy = config;
  std::string out;
  for (auto& [k, f] : fields(copy)) out += k + " = " + f.get() + "\n";
  return out;
}

}  // namespace vn
