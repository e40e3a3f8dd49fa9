// SPDX-License-Identifier: Apache-2.0
#include "sdfoam/train/config.hpp"

#include "sdfoam/core/types.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

namespace sdfoam::train {

namespace {

using Field = std::variant<int TrainConfig::*, double TrainConfig::*, bool TrainConfig::*, std::uint64_t TrainConfig::*>;

struct Entry {
  const char* key;
  Field field;
};

const std::vector<Entry>& table() {
  static const std::vector<Entry> t{
      {"iterations", &TrainConfig::iterations},
      {"batch_rays", &TrainConfig::batch_rays},
      {"lambda_eik", &TrainConfig::lambda_eik},
      {"eik_samples", &TrainConfig::eik_samples},
      {"lr_pos_start", &TrainConfig::lr_pos_start},
      {"lr_pos_end", &TrainConfig::lr_pos_end},
      {"lr_sdf_start", &TrainConfig::lr_sdf_start},
      {"lr_sdf_end", &TrainConfig::lr_sdf_end},
      {"lr_beta", &TrainConfig::lr_beta},
      {"lr_color_start", &TrainConfig::lr_color_start},
      {"lr_color_end", &TrainConfig::lr_color_end},
      {"init_sites", &TrainConfig::init_sites},
      {"max_sites", &TrainConfig::max_sites},
      {"warmup_end", &TrainConfig::warmup_end},
      {"densify_interval", &TrainConfig::densify_interval},
      {"densify_until", &TrainConfig::densify_until},
      {"split_fraction", &TrainConfig::split_fraction},
      {"prune_floor", &TrainConfig::prune_floor},
      {"rebuild_interval", &TrainConfig::rebuild_interval},
      {"scene_radius", &TrainConfig::scene_radius},
      {"init_radius", &TrainConfig::init_radius},
      {"init_beta", &TrainConfig::init_beta},
      {"mlp_frequencies", &TrainConfig::mlp_frequencies},
      {"mlp_hidden", &TrainConfig::mlp_hidden},
      {"mlp_layers", &TrainConfig::mlp_layers},
      {"softplus_beta", &TrainConfig::softplus_beta},
      {"learn_background", &TrainConfig::learn_background},
      {"masked", &TrainConfig::masked},
      {"log_interval", &TrainConfig::log_interval},
      {"t_stop", &TrainConfig::t_stop},
      {"seed", &TrainConfig::seed},
      {"threads", &TrainConfig::threads},
  };
  return t;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw Error(Errc::InvalidArgument, "bad value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(Errc::InvalidArgument, what);
}

}  // namespace

void TrainConfig::validate() const {
  require(iterations >= 0, "iterations must be >= 0");
  require(batch_rays >= 1, "batch_rays must be >= 1");
  require(lambda_eik >= 0.0, "lambda_eik must be >= 0");
  require(eik_samples >= 1, "eik_samples must be >= 1");
  for (double r : {lr_pos_start, lr_pos_end, lr_sdf_start, lr_sdf_end, lr_beta, lr_color_start, lr_color_end}) {
    require(r > 0.0, "learning rates must be > 0");
  }
  require(init_sites >= 8, "init_sites must be >= 8");
  require(max_sites >= init_sites, "max_sites must be >= init_sites");
  require(warmup_end >= 1, "warmup_end must be >= 1");
  require(densify_interval >= 1, "densify_interval must be >= 1");
  require(densify_until >= 0, "densify_until must be >= 0");
  require(split_fraction >= 0.0 && split_fraction <= 1.0, "split_fraction must be in [0, 1]");
  require(prune_floor >= 0.0, "prune_floor must be >= 0");
  require(rebuild_interval >= 1, "rebuild_interval must be >= 1");
  require(scene_radius > 0.0 && init_radius > 0.0, "radii must be > 0");
  require(init_beta > 0.0, "init_beta must be > 0");
  require(mlp_frequencies >= 0 && mlp_hidden >= 1 && mlp_layers >= 1, "bad MLP shape");
  require(softplus_beta > 0.0, "softplus_beta must be > 0");
  require(log_interval >= 1, "log_interval must be >= 1");
  require(t_stop >= 0.0 && t_stop < 1.0, "t_stop must be in [0, 1)");
  require(threads >= 0, "threads must be >= 0");
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  for (const auto& e : table()) {
    if (key != e.key) continue;
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(this->*member)>;
          if constexpr (std::is_same_v<T, bool>) {
            if (value == "true" || value == "1") {
              this->*member = true;
            } else if (value == "false" || value == "0") {
              this->*member = false;
            } else {
              throw Error(Errc::InvalidArgument, "bad boolean '" + std::string(value) + "' for " + std::string(key));
            }
          } else {
            this->*member = parse_number<T>(key, value);
          }
        },
        e.field);
    return;
  }
  throw Error(Errc::InvalidArgument, "unknown config key '" + std::string(key) + "'");
}

void TrainConfig::parse(std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::InvalidArgument, "config line " + std::to_string(line_no) + " has no '='");
    }
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

std::string TrainConfig::to_string() const {
  std::ostringstream os;
  for (const auto& e : table()) {
    os << e.key << " = ";
    std::visit(
        [&](auto member) {
          using T = std::remove_cvref_t<decltype(this->*member)>;
          if constexpr (std::is_same_v<T, bool>) {
            os << (this->*member ? "true" : "false");
          } else if constexpr (std::is_same_v<T, double>) {
            char buf[32];
            const auto r = std::to_chars(buf, buf + sizeof buf, this->*member);
            os << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf));
          } else {
            os << this->*member;
          }
        },
        e.field);
    os << "\n";
  }
  return os.str();
}

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> out;
  for (const auto& e : table()) out.emplace_back(e.key);
  return out;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::MissingFile, path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  TrainConfig cfg;
  cfg.parse(ss.str());
  cfg.validate();
  return cfg;
}

}  // namespace sdfoam::train
