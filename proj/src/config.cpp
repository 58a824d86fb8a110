#include "eyessl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>

#include "eyessl/errors.hpp"

namespace eyessl {
namespace {

std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view key, std::string_view text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError(std::string(key), "expected a real number, got '" + std::string(text) + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view text) {
  Int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(std::string(key), "expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(std::string(key), "expected true/false, got '" + std::string(text) + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_list(std::string_view text, Parse parse) {
  std::vector<T> out;
  if (text.size() >= 2 && text.front() == '[' && text.back() == ']') {
    text = text.substr(1, text.size() - 2);
  }
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse(trim(text.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return out;
}

template <typename T, typename Format>
std::string format_list(const std::vector<T>& values, Format fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += fmt(values[i]);
  }
  return out;
}

struct Field {
  std::string name;
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename M>
Field real_field(std::string name, M member) {
  return {name,
          [name, member](TrainConfig& c, std::string_view v) { c.*member = parse_double(name, v); },
          [member](const TrainConfig& c) { return format_double(c.*member); }};
}

template <typename M>
Field aug_real_field(std::string name, M member) {
  return {name,
          [name, member](TrainConfig& c, std::string_view v) {
            c.augment.*member = parse_double(name, v);
          },
          [member](const TrainConfig& c) { return format_double(c.augment.*member); }};
}

template <typename M>
Field int_field(std::string name, M member) {
  return {name,
          [name, member](TrainConfig& c, std::string_view v) { c.*member = parse_int<int>(name, v); },
          [member](const TrainConfig& c) { return std::to_string(c.*member); }};
}

template <typename M>
Field optional_int_field(std::string name, M member) {
  return {name,
          [name, member](TrainConfig& c, std::string_view v) {
            if (v == "none") {
              (c.*member).reset();
            } else {
              c.*member = parse_int<int>(name, v);
            }
          },
          [member](const TrainConfig& c) {
            return (c.*member) ? std::to_string(*(c.*member)) : std::string("none");
          }};
}

template <typename M>
Field optional_real_field(std::string name, M member) {
  return {name,
          [name, member](TrainConfig& c, std::string_view v) {
            if (v == "none") {
              (c.*member).reset();
            } else {
              c.*member = parse_double(name, v);
            }
          },
          [member](const TrainConfig& c) {
            return (c.*member) ? format_double(*(c.*member)) : std::string("none");
          }};
}

template <typename E>
Field enum_field(std::string name, E TrainConfig::*member, std::vector<E> choices) {
  return {name,
          [name, member, choices](TrainConfig& c, std::string_view v) {
            for (E e : choices) {
              if (to_string(e) == v) {
                c.*member = e;
                return;
              }
            }
            std::string allowed;
            for (E e : choices) allowed += (allowed.empty() ? "" : "|") + to_string(e);
            throw ConfigError(name, "expected one of " + allowed + ", got '" + std::string(v) + "'");
          },
          [member](const TrainConfig& c) { return to_string(c.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using C = TrainConfig;
    using Aug = AugmentConfig;
    std::vector<Field> f;
    f.push_back(enum_field("method", &C::method, {Method::kSL, Method::kSSL_D, Method::kSSL_SS}));
    f.push_back(real_field("lambda1", &C::lambda1));
    f.push_back(real_field("lambda2", &C::lambda2));
    f.push_back(real_field("lambda3", &C::lambda3));
    f.push_back(int_field("boundary_radius", &C::boundary_radius));
    f.push_back(real_field("boundary_weight", &C::boundary_weight));
    f.push_back(real_field("slope_u", &C::slope_u));
    f.push_back(real_field("slope_ss", &C::slope_ss));
    f.push_back(optional_real_field("schedule_cap_u", &C::schedule_cap_u));
    f.push_back(optional_real_field("schedule_cap_ss", &C::schedule_cap_ss));
    f.push_back(real_field("sharpen_temperature", &C::sharpen_temperature));
    f.push_back(int_field("A", &C::A));
    f.push_back(int_field("batch_labeled", &C::batch_labeled));
    f.push_back(int_field("batch_unlabeled", &C::batch_unlabeled));
    f.push_back(real_field("learning_rate", &C::learning_rate));
    f.push_back(real_field("adam_beta1", &C::adam_beta1));
    f.push_back(real_field("adam_beta2", &C::adam_beta2));
    f.push_back(real_field("adam_epsilon", &C::adam_epsilon));
    f.push_back(int_field("epochs", &C::epochs));
    f.push_back({"seed",
                 [](C& c, std::string_view v) { c.seed = parse_int<std::uint64_t>("seed", v); },
                 [](const C& c) { return std::to_string(c.seed); }});
    f.push_back(int_field("num_classes", &C::num_classes));
    f.push_back(enum_field("preset", &C::preset, {ModelPreset::kFull, ModelPreset::kDesk}));
    f.push_back(optional_int_field("depth", &C::depth));
    f.push_back(optional_int_field("base_channels", &C::base_channels));
    f.push_back(optional_int_field("height", &C::height));
    f.push_back(optional_int_field("width", &C::width));

    f.push_back({"gamma_values",
                 [](C& c, std::string_view v) {
                   c.augment.gamma_values = parse_list<double>(
                       v, [](std::string_view s) { return parse_double("gamma_values", s); });
                 },
                 [](const C& c) { return format_list(c.augment.gamma_values, format_double); }});
    f.push_back({"clahe_clips",
                 [](C& c, std::string_view v) {
                   c.augment.clahe_clips = parse_list<double>(
                       v, [](std::string_view s) { return parse_double("clahe_clips", s); });
                 },
                 [](const C& c) { return format_list(c.augment.clahe_clips, format_double); }});
    f.push_back({"clahe_grids",
                 [](C& c, std::string_view v) {
                   c.augment.clahe_grids = parse_list<int>(
                       v, [](std::string_view s) { return parse_int<int>("clahe_grids", s); });
                 },
                 [](const C& c) {
                   return format_list(c.augment.clahe_grids, [](int g) { return std::to_string(g); });
                 }});
    f.push_back(aug_real_field("p_clahe", &Aug::p_clahe));
    f.push_back(aug_real_field("p_gamma", &Aug::p_gamma));
    f.push_back(aug_real_field("p_transform", &Aug::p_transform));
    f.push_back(aug_real_field("p_rotate", &Aug::p_rotate));
    f.push_back(aug_real_field("p_translate", &Aug::p_translate));
    f.push_back(aug_real_field("max_rotation_deg", &Aug::max_rotation_deg));
    f.push_back({"max_shift_px",
                 [](C& c, std::string_view v) { c.augment.max_shift_px = parse_int<int>("max_shift_px", v); },
                 [](const C& c) { return std::to_string(c.augment.max_shift_px); }});
    f.push_back(aug_real_field("p_flip", &Aug::p_flip));
    f.push_back(aug_real_field("p_blur", &Aug::p_blur));
    f.push_back(aug_real_field("blur_sigma_min", &Aug::blur_sigma_min));
    f.push_back(aug_real_field("blur_sigma_max", &Aug::blur_sigma_max));
    f.push_back(aug_real_field("p_lines", &Aug::p_lines));

    f.push_back(enum_field("data_source", &C::data_source,
                           {DataSource::kSynthetic, DataSource::kDirectory}));
    f.push_back({"data_root", [](C& c, std::string_view v) { c.data_root = std::string(v); },
                 [](const C& c) { return c.data_root; }});
    f.push_back(int_field("synthetic_train", &C::synthetic_train));
    f.push_back(int_field("synthetic_subjects", &C::synthetic_subjects));
    f.push_back(int_field("synthetic_val", &C::synthetic_val));
    f.push_back(int_field("synthetic_val_subjects", &C::synthetic_val_subjects));
    f.push_back(optional_int_field("k", &C::k));
    f.push_back(enum_field("split_mode", &C::split_mode,
                           {SplitMode::kMultiSubject, SplitMode::kSingleSubject}));
    f.push_back({"split_subject", [](C& c, std::string_view v) { c.split_subject = std::string(v); },
                 [](const C& c) { return c.split_subject; }});
    f.push_back(enum_field("iou_aggregation", &C::iou_aggregation,
                           {IouAggregation::kGlobal, IouAggregation::kPerImage}));
    f.push_back({"iou_include_background",
                 [](C& c, std::string_view v) {
                   c.iou_include_background = parse_bool("iou_include_background", v);
                 },
                 [](const C& c) { return std::string(c.iou_include_background ? "true" : "false"); }});
    return f;
  }();
  return table;
}

const Field* find_field(std::string_view key) {
  for (const Field& f : fields()) {
    if (f.name == key) return &f;
  }
  return nullptr;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::kSL: return "SL";
    case Method::kSSL_D: return "SSL_D";
    case Method::kSSL_SS: return "SSL_SS";
  }
  return "?";
}

std::string to_string(ModelPreset p) { return p == ModelPreset::kFull ? "full" : "desk"; }
std::string to_string(DataSource s) { return s == DataSource::kSynthetic ? "synthetic" : "directory"; }
std::string to_string(SplitMode m) {
  return m == SplitMode::kMultiSubject ? "multi-subject" : "single-subject";
}
std::string to_string(IouAggregation a) {
  return a == IouAggregation::kGlobal ? "global" : "per-image";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::kSL, Method::kSSL_D, Method::kSSL_SS}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError("method", "expected SL|SSL_D|SSL_SS, got '" + std::string(text) + "'");
}

SplitMode parse_split_mode(std::string_view text) {
  for (SplitMode m : {SplitMode::kMultiSubject, SplitMode::kSingleSubject}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError("split_mode", "expected multi-subject|single-subject");
}

void TrainConfig::validate() const {
  require(A >= 1, "A must be >= 1");
  require(batch_labeled >= 1, "batch_labeled must be >= 1");
  require(batch_unlabeled >= 1, "batch_unlabeled must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(epochs >= 1, "epochs must be >= 1");
  require(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0, "lambda1..3 must be >= 0");
  require(slope_u >= 0.0 && slope_ss >= 0.0, "schedule slopes must be >= 0");
  require(!schedule_cap_u || *schedule_cap_u >= 0.0, "schedule_cap_u must be >= 0");
  require(!schedule_cap_ss || *schedule_cap_ss >= 0.0, "schedule_cap_ss must be >= 0");
  require(sharpen_temperature > 0.0, "sharpen_temperature must be > 0");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must be in [0,1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must be in [0,1)");
  require(adam_epsilon > 0.0, "adam_epsilon must be > 0");
  require(boundary_radius >= 1, "boundary_radius must be >= 1");
  require(boundary_weight >= 0.0, "boundary_weight must be >= 0");
  require(num_classes >= 2 && num_classes <= 255, "num_classes must be in [2,255]");
  require(!depth || *depth >= 1, "depth must be >= 1");
  require(!base_channels || *base_channels >= 1, "base_channels must be >= 1");
  require(!height || *height >= 8, "height must be >= 8");
  require(!width || *width >= 8, "width must be >= 8");
  require(!augment.gamma_values.empty(), "gamma_values must not be empty");
  for (double g : augment.gamma_values) require(g > 0.0, "gamma_values must be > 0");
  require(!augment.clahe_clips.empty() && augment.clahe_clips.size() == augment.clahe_grids.size(),
          "clahe_clips and clahe_grids must be non-empty and of equal length");
  for (double c : augment.clahe_clips) require(c >= 1.0, "clahe_clips must be >= 1");
  for (int g : augment.clahe_grids) require(g >= 1, "clahe_grids must be >= 1");
  for (double p : {augment.p_clahe, augment.p_gamma, augment.p_transform, augment.p_rotate,
                   augment.p_translate, augment.p_flip, augment.p_blur, augment.p_lines}) {
    require(p >= 0.0 && p <= 1.0, "augmentation probabilities must be in [0,1]");
  }
  require(augment.max_rotation_deg >= 0.0, "max_rotation_deg must be >= 0");
  require(augment.max_shift_px >= 0, "max_shift_px must be >= 0");
  require(augment.blur_sigma_min > 0.0 && augment.blur_sigma_min <= augment.blur_sigma_max,
          "blur sigma range must satisfy 0 < min <= max");
  require(synthetic_train >= 1 && synthetic_val >= 1, "synthetic set sizes must be >= 1");
  require(synthetic_subjects >= 1 && synthetic_val_subjects >= 1,
          "synthetic subject counts must be >= 1");
  require(!k || *k >= 1, "k must be >= 1");
  if (data_source == DataSource::kDirectory && data_root.empty()) {
    throw ConfigError("data_root", "required when data_source is directory");
  }
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError(std::string(line), "line " + std::to_string(line_no) + " lacks ':'");
    }
    apply_override(cfg, trim(line.substr(0, colon)), trim(line.substr(colon + 1)));
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(TrainConfig& cfg, std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError(std::string(key), "unknown key");
  f->set(cfg, value);
}

void apply_override(TrainConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(std::string(assignment), "override must have the form key=value");
  }
  apply_override(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string serialize_config(const TrainConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += f.name + ": " + f.get(cfg) + "\n";
  return out;
}

std::string config_hash(const TrainConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : fields()) keys.push_back(f.name);
  return keys;
}

}  // namespace eyessl
