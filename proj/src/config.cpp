#include "lgcn/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lgcn {

const char* relation_name(Relation relation) {
  switch (relation) {
    case Relation::kGcn: return "gcn";
    case Relation::kFc: return "fc";
    case Relation::kLstm: return "lstm";
    case Relation::kNone: return "none";
  }
  return "?";
}

Relation parse_relation(const std::string& name) {
  if (name == "gcn") return Relation::kGcn;
  if (name == "fc") return Relation::kFc;
  if (name == "lstm") return Relation::kLstm;
  if (name == "none") return Relation::kNone;
  throw std::invalid_argument("unknown relation module: " + name);
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) {
    throw std::invalid_argument("config: bad value '" + value + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw std::invalid_argument("config: bad boolean '" + value + "' for " + key);
}

struct Field {
  const char* key;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
};

#define SIZE_FIELD(name)                                                                   \
  Field {                                                                                  \
    #name, [](const Config& c) { return std::to_string(c.name); },                         \
        [](Config& c, const std::string& v) { c.name = parse_number<std::size_t>(#name, v); } \
  }
#define DOUBLE_FIELD(name)                                                            \
  Field {                                                                             \
    #name, [](const Config& c) { return format_double(c.name); },                     \
        [](Config& c, const std::string& v) { c.name = parse_number<double>(#name, v); } \
  }
#define BOOL_FIELD(name)                                                     \
  Field {                                                                    \
    #name, [](const Config& c) { return std::string(c.name ? "1" : "0"); },  \
        [](Config& c, const std::string& v) { c.name = parse_bool(#name, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SIZE_FIELD(d_o),
      SIZE_FIELD(d_s_loc),
      SIZE_FIELD(d_p),
      SIZE_FIELD(d_s),
      SIZE_FIELD(hidden),
      SIZE_FIELD(d_char),
      SIZE_FIELD(d_c),
      SIZE_FIELD(word_dim),
      SIZE_FIELD(d_g),
      SIZE_FIELD(attention_dim),
      SIZE_FIELD(char_width),
      SIZE_FIELD(chars_per_word),
      SIZE_FIELD(max_words),
      SIZE_FIELD(global_width),
      SIZE_FIELD(gcn_layers),
      SIZE_FIELD(objects),
      DOUBLE_FIELD(lr),
      DOUBLE_FIELD(beta1),
      DOUBLE_FIELD(beta2),
      DOUBLE_FIELD(epsilon),
      SIZE_FIELD(batch_size),
      SIZE_FIELD(epochs),
      Field{"seed", [](const Config& c) { return std::to_string(c.seed); },
            [](Config& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); }},
      DOUBLE_FIELD(init_scale),
      Field{"task", [](const Config& c) { return std::string(task_name(c.task)); },
            [](Config& c, const std::string& v) { c.task = parse_task(v); }},
      BOOL_FIELD(use_objects),
      Field{"relation", [](const Config& c) { return std::string(relation_name(c.relation)); },
            [](Config& c, const std::string& v) { c.relation = parse_relation(v); }},
      BOOL_FIELD(use_spatial_loc),
      BOOL_FIELD(use_temporal_loc),
      BOOL_FIELD(shared_projection),
      BOOL_FIELD(normalize_boxes),
      BOOL_FIELD(shared_output_rnn),
      Field{"embeddings", [](const Config& c) { return c.embeddings; },
            [](Config& c, const std::string& v) { c.embeddings = v; }},
  };
  return table;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

void Config::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (d_p % 2 != 0) fail("d_p must be even");
  if (gcn_layers < 1) fail("gcn_layers must be >= 1");
  if (objects < 1) fail("objects must be >= 1");
  if (d_o == 0 || d_s == 0 || hidden == 0 || d_g == 0 || word_dim == 0) fail("zero width");
  if (d_s % 2 != 0) fail("d_s must be even (output Bi-LSTM uses d_s/2 per direction)");
  if (char_width == 0 || char_width > chars_per_word) fail("char_width must be in 1..chars_per_word");
  if (global_width % 2 == 0) fail("global_width must be odd");
  if (!(lr > 0.0) || !(epsilon > 0.0)) fail("lr and epsilon must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must be in [0, 1)");
  if (!(init_scale > 0.0)) fail("init_scale must be positive");
}

std::size_t Config::effective_batch() const {
  if (batch_size > 0) return batch_size;
  return task == TaskType::kMultipleChoice ? 64 : 128;
}

std::string Config::to_string() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + "=" + f.get(*this) + "\n";
  return out;
}

void Config::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

Config Config::parse(const std::string& text) {
  Config config;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(number) + " is not key=value");
    }
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  config.validate();
  return config;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  out << to_string();
}

std::string Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_string()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Config small_config() {
  Config c;
  c.d_o = 16;
  c.d_s_loc = 16;
  c.d_p = 8;
  c.d_s = 16;
  c.hidden = 8;
  c.d_char = 4;
  c.d_c = 4;
  c.word_dim = 16;
  c.d_g = 8;
  c.attention_dim = 8;
  c.char_width = 3;
  c.chars_per_word = 8;
  c.lr = 3e-3;
  c.batch_size = 16;
  c.epochs = 20;
  return c;
}

Config tiny_config() {
  Config c;
  c.d_o = 3;
  c.d_s_loc = 2;
  c.d_p = 2;
  c.d_s = 6;
  c.hidden = 2;
  c.d_char = 2;
  c.d_c = 2;
  c.word_dim = 3;
  c.d_g = 2;
  c.attention_dim = 2;
  c.char_width = 2;
  c.chars_per_word = 3;
  c.objects = 2;
  c.batch_size = 2;
  c.epochs = 1;
  c.init_scale = 2.0;
  return c;
}

}  // namespace lgcn
