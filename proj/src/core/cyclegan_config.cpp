#include "vhist/cyclegan_config.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "vhist/errors.hpp"

namespace vhist {

std::string to_string(InputDomain d) {
  switch (d) {
    case InputDomain::qobm_inverted: return "qobm_inverted";
    case InputDomain::qobm_raw: return "qobm_raw";
    case InputDomain::dpc: return "dpc";
    case InputDomain::single_capture: return "single_capture";
  }
  return "unknown";
}

InputDomain input_domain_from_string(const std::string& s) {
  for (InputDomain d : {InputDomain::qobm_inverted, InputDomain::qobm_raw, InputDomain::dpc,
                        InputDomain::single_capture}) {
    if (to_string(d) == s) return d;
  }
  throw ConfigError("unknown input_domain '" + s + "'");
}

void CycleGANConfig::validate() const {
  if (n_res_blocks < 1) throw ConfigError("n_res_blocks must be >= 1");
  if (n_disc_layers < 1) throw ConfigError("n_disc_layers must be >= 1");
  if (base_width < 1) throw ConfigError("base_width must be >= 1");
  if (!(lambda_cycle > 0.0)) throw ConfigError("lambda_cycle must be positive");
  if (!(lambda_identity >= 0.0)) throw ConfigError("lambda_identity must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs_flat < 0 || epochs_decay < 0 || epochs_flat + epochs_decay < 1) {
    throw ConfigError("epoch counts must be nonnegative with a positive total");
  }
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(finetune_lr > 0.0)) throw ConfigError("finetune_lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (replay_buffer < 0) throw ConfigError("replay_buffer must be nonnegative");
}

CycleGANConfig CycleGANConfig::paper_small() { return CycleGANConfig{}; }

CycleGANConfig CycleGANConfig::paper_large() {
  CycleGANConfig c;
  c.n_res_blocks = 12;
  c.n_disc_layers = 6;
  return c;
}

CycleGANConfig CycleGANConfig::desk() {
  CycleGANConfig c;
  c.n_res_blocks = 2;
  c.n_disc_layers = 2;
  c.base_width = 16;
  c.epochs_flat = 2;
  c.epochs_decay = 2;
  return c;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<std::string(const CycleGANConfig&)> get;
  std::function<void(CycleGANConfig&, const std::string&)> set;
};

int parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  try {
    const long long r = std::stoll(v, &used);
    if (used == v.size()) return static_cast<int>(r);
  } catch (const std::exception&) {
  }
  throw ConfigError("cyclegan." + key + ": expected an integer, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  try {
    const double r = std::stod(v, &used);
    if (used == v.size()) return r;
  } catch (const std::exception&) {
  }
  throw ConfigError("cyclegan." + key + ": expected a number, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("cyclegan." + key + ": expected true/false, got '" + v + "'");
}

#define VHIST_INT_FIELD(name)                                                      \
  {#name, {[](const CycleGANConfig& c) { return std::to_string(c.name); },          \
           [](CycleGANConfig& c, const std::string& v) { c.name = parse_int(#name, v); }}}
#define VHIST_DOUBLE_FIELD(name)                                                   \
  {#name, {[](const CycleGANConfig& c) { return fmt(c.name); },                     \
           [](CycleGANConfig& c, const std::string& v) { c.name = parse_double(#name, v); }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      VHIST_INT_FIELD(n_res_blocks),
      VHIST_INT_FIELD(n_disc_layers),
      VHIST_INT_FIELD(base_width),
      VHIST_DOUBLE_FIELD(lambda_cycle),
      VHIST_DOUBLE_FIELD(lambda_identity),
      VHIST_INT_FIELD(batch_size),
      VHIST_INT_FIELD(epochs_flat),
      VHIST_INT_FIELD(epochs_decay),
      VHIST_DOUBLE_FIELD(lr0),
      VHIST_DOUBLE_FIELD(finetune_lr),
      VHIST_DOUBLE_FIELD(beta1),
      VHIST_DOUBLE_FIELD(beta2),
      VHIST_INT_FIELD(replay_buffer),
      {"augment",
       {[](const CycleGANConfig& c) { return std::string(c.augment ? "true" : "false"); },
        [](CycleGANConfig& c, const std::string& v) { c.augment = parse_bool("augment", v); }}},
      {"input_domain",
       {[](const CycleGANConfig& c) { return to_string(c.input_domain); },
        [](CycleGANConfig& c, const std::string& v) { c.input_domain = input_domain_from_string(v); }}},
      {"seed",
       {[](const CycleGANConfig& c) { return std::to_string(c.seed); },
        [](CycleGANConfig& c, const std::string& v) {
          try {
            std::size_t used = 0;
            c.seed = std::stoull(v, &used);
            if (used == v.size()) return;
          } catch (const std::exception&) {
          }
          throw ConfigError("cyclegan.seed: expected an unsigned integer, got '" + v + "'");
        }}},
  };
  return table;
}

#undef VHIST_INT_FIELD
#undef VHIST_DOUBLE_FIELD

}  // namespace

std::map<std::string, std::string> CycleGANConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : fields()) out[key] = field.get(*this);
  return out;
}

CycleGANConfig CycleGANConfig::from_map(const std::map<std::string, std::string>& kv,
                                        CycleGANConfig base) {
  for (const auto& [key, value] : kv) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown cyclegan key '" + key + "'");
    it->second.set(base, value);
  }
  base.validate();
  return base;
}

CycleGANConfig CycleGANConfig::from_map(const std::map<std::string, std::string>& kv) {
  return from_map(kv, CycleGANConfig{});
}

double lr_at(double epoch, const CycleGANConfig& config) {
  if (!(epoch >= 0.0)) throw ParameterError("epoch must be nonnegative");
  const double flat = config.epochs_flat;
  const double end = flat + config.epochs_decay;
  if (epoch > end) {
    throw ScheduleComplete("epoch " + fmt(epoch) + " is past the schedule end " + fmt(end));
  }
  if (epoch < flat) return config.lr0;
  if (config.epochs_decay == 0) return 0.0;
  return config.lr0 * ((end - epoch) / config.epochs_decay);
}

ObjectiveTotals full_objective(const LossTerms& t, double lambda_cycle, double lambda_identity) {
  const double parts[] = {t.cycle, t.gen_x, t.gen_y, t.identity, t.disc_x, t.disc_y};
  for (double p : parts) {
    if (std::isnan(p)) {
      std::ostringstream os;
      os << "non-finite loss: cycle=" << t.cycle << " gen_x=" << t.gen_x << " gen_y=" << t.gen_y
         << " identity=" << t.identity << " disc_x=" << t.disc_x << " disc_y=" << t.disc_y;
      throw TrainingDivergence(os.str(), -1);
    }
  }
  return {lambda_cycle * t.cycle + t.gen_x + t.gen_y + lambda_identity * t.identity,
          t.disc_x + t.disc_y};
}

}  // namespace vhist
