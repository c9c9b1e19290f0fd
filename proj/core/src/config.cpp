#include "owl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace owl::config {

using protocol::RunConfig;

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("failed to format number");
  return std::string(buf, end);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ConfigError(key, "config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key, "config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError(key, "config key '" + key + "': expected true/false, got '" + v + "'");
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename Access>
Field real_field(Access access) {
  return {[access](const RunConfig& c) { return format_double(access(c)); },
          [access](RunConfig& c, const std::string& k, const std::string& v) {
            access(c) = parse_double(k, v);
          }};
}

template <typename Access>
Field count_field(Access access) {
  return {[access](const RunConfig& c) { return std::to_string(access(c)); },
          [access](RunConfig& c, const std::string& k, const std::string& v) {
            using T = std::remove_reference_t<decltype(access(c))>;
            access(c) = static_cast<T>(parse_uint(k, v));
          }};
}

template <typename Access>
Field bool_field(Access access) {
  return {[access](const RunConfig& c) {
            return std::string(access(c) ? "true" : "false");
          },
          [access](RunConfig& c, const std::string& k, const std::string& v) {
            access(c) = parse_bool(k, v);
          }};
}

using Registry = std::vector<std::pair<std::string, Field>>;

const Registry& registry() {
  static const Registry reg = [] {
    Registry r;
    r.emplace_back("seed", count_field([](auto& c) -> auto& { return c.seed; }));

    r.emplace_back("cluster.delta", real_field([](auto& c) -> auto& { return c.cluster.margin; }));
    r.emplace_back("cluster.eta", real_field([](auto& c) -> auto& { return c.cluster.momentum; }));
    r.emplace_back("cluster.queue_size",
                   count_field([](auto& c) -> auto& { return c.cluster.queue_size; }));
    r.emplace_back("cluster.burn_in",
                   count_field([](auto& c) -> auto& { return c.cluster.burn_in; }));
    r.emplace_back("cluster.update_period",
                   count_field([](auto& c) -> auto& { return c.cluster.update_period; }));
    r.emplace_back("cluster.distance",
                   Field{[](const RunConfig&) { return std::string("euclidean"); },
                         [](RunConfig& c, const std::string& k, const std::string& v) {
                           if (v != "euclidean") {
                             throw ConfigError(k, "config key '" + k + "': only 'euclidean' is supported");
                           }
                           c.cluster.distance = cluster::Distance::kEuclidean;
                         }});

    r.emplace_back("energy.temperature",
                   real_field([](auto& c) -> auto& { return c.energy.temperature; }));
    r.emplace_back("energy.mask_value",
                   real_field([](auto& c) -> auto& { return c.energy.mask_value; }));
    r.emplace_back("energy.identifier",
                   Field{[](const RunConfig& c) {
                           return std::string(c.identifier == protocol::IdentifierKind::kSoftmax ? "softmax"
                                                                                                 : "weibull");
                         },
                         [](RunConfig& c, const std::string& k, const std::string& v) {
                           if (v == "weibull") {
                             c.identifier = protocol::IdentifierKind::kWeibull;
                           } else if (v == "softmax") {
                             c.identifier = protocol::IdentifierKind::kSoftmax;
                           } else {
                             throw ConfigError(k, "config key '" + k + "': expected weibull or softmax");
                           }
                         }});
    r.emplace_back("energy.softmax_threshold",
                   real_field([](auto& c) -> auto& { return c.softmax_threshold; }));

    r.emplace_back("autolabel.top_k",
                   count_field([](auto& c) -> auto& { return c.autolabel.top_k; }));
    r.emplace_back("autolabel.overlap_thresh",
                   real_field([](auto& c) -> auto& { return c.autolabel.overlap_thresh; }));

    r.emplace_back("eval.iou_thresh", real_field([](auto& c) -> auto& { return c.eval.iou_thresh; }));
    r.emplace_back("eval.wi_recall", real_field([](auto& c) -> auto& { return c.eval.wi_recall; }));
    r.emplace_back("eval.aose_score_thresh",
                   real_field([](auto& c) -> auto& { return c.eval.aose_score_thresh; }));

    r.emplace_back("replay.n_ex", count_field([](auto& c) -> auto& { return c.n_ex; }));
    r.emplace_back("replay.finetune_fraction",
                   real_field([](auto& c) -> auto& { return c.train.finetune_fraction; }));

    r.emplace_back("train.learning_rate",
                   real_field([](auto& c) -> auto& { return c.train.learning_rate; }));
    r.emplace_back("train.epochs", count_field([](auto& c) -> auto& { return c.train.epochs; }));
    r.emplace_back("train.contrastive_weight",
                   real_field([](auto& c) -> auto& { return c.train.contrastive_weight; }));
    r.emplace_back("train.batch_size",
                   count_field([](auto& c) -> auto& { return c.train.batch_size; }));
    r.emplace_back("train.objectness_floor",
                   real_field([](auto& c) -> auto& { return c.train.objectness_floor; }));

    r.emplace_back("world.dim", count_field([](auto& c) -> auto& { return c.world.dim; }));
    r.emplace_back("world.num_tasks",
                   count_field([](auto& c) -> auto& { return c.world.num_tasks; }));
    r.emplace_back("world.classes_per_task",
                   count_field([](auto& c) -> auto& { return c.world.classes_per_task; }));
    r.emplace_back("world.distractor_classes",
                   count_field([](auto& c) -> auto& { return c.world.distractor_classes; }));
    r.emplace_back("world.train_instances_per_class",
                   count_field([](auto& c) -> auto& { return c.world.train_instances_per_class; }));
    r.emplace_back("world.val_instances_per_class",
                   count_field([](auto& c) -> auto& { return c.world.val_instances_per_class; }));
    r.emplace_back("world.test_instances_per_class",
                   count_field([](auto& c) -> auto& { return c.world.test_instances_per_class; }));
    r.emplace_back("world.separation", real_field([](auto& c) -> auto& { return c.world.separation; }));
    r.emplace_back("world.feature_noise",
                   real_field([](auto& c) -> auto& { return c.world.feature_noise; }));
    r.emplace_back("world.background_feature_scale",
                   real_field([](auto& c) -> auto& { return c.world.background_feature_scale; }));
    r.emplace_back("world.box_jitter", real_field([](auto& c) -> auto& { return c.world.box_jitter; }));
    r.emplace_back("world.background_rate",
                   real_field([](auto& c) -> auto& { return c.world.background_rate; }));
    r.emplace_back("world.objectness_noise",
                   real_field([](auto& c) -> auto& { return c.world.objectness_noise; }));
    r.emplace_back("world.scene_extent",
                   real_field([](auto& c) -> auto& { return c.world.scene_extent; }));
    r.emplace_back("world.max_objects",
                   count_field([](auto& c) -> auto& { return c.world.max_objects; }));
    r.emplace_back("world.unlabelled_prob",
                   real_field([](auto& c) -> auto& { return c.world.unlabelled_prob; }));

    r.emplace_back("flags.cc", bool_field([](auto& c) -> auto& { return c.flags.cc; }));
    r.emplace_back("flags.alu", bool_field([](auto& c) -> auto& { return c.flags.alu; }));
    r.emplace_back("flags.ebui", bool_field([](auto& c) -> auto& { return c.flags.ebui; }));
    return r;
  }();
  return reg;
}

const Field& field(const std::string& key) {
  for (const auto& [k, f] : registry()) {
    if (k == key) return f;
  }
  throw ConfigError(key, "unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, f] : registry()) out.push_back(k);
    return out;
  }();
  return keys;
}

void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  field(key).set(cfg, key, value);
}

std::string get_value(const RunConfig& cfg, const std::string& key) { return field(key).get(cfg); }

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError(std::string(assignment), "override '" + std::string(assignment) + "' is not key=value");
  }
  set_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    std::string line = trim(raw.substr(0, raw.find_first_of("#;")));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(line, "line " + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line, "line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    if (!seen.insert(key).second) {
      throw ConfigError(key, "line " + std::to_string(line_no) + ": duplicate config key '" + key + "'");
    }
    set_value(cfg, key, value);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, f] : registry()) {
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? std::string() : key.substr(0, dot);
    const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    if (sec != section) {
      out << "\n[" << sec << "]\n";
      section = sec;
    }
    out << name << " = " << f.get(cfg) << "\n";
  }
  return out.str();
}

}  // namespace owl::config
