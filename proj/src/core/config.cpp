#include "vhist/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "vhist/io.hpp"

extern char** environ;

namespace vhist {

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string boolean(bool b) { return b ? "true" : "false"; }

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::uint64_t parse_seed(const std::string& v, const std::string& where) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw ConfigError(where + ": seed must be an unsigned integer, got '" + v + "'");
  }
  return out;
}

}  // namespace

HePalette faded_palette() {
  HePalette p;
  p.nucleus = {150, 105, 185};
  p.cytoplasm = {240, 195, 222};
  p.rbc = {200, 70, 70};
  p.vessel = {248, 238, 244};
  return p;
}

RunConfig::RunConfig() {
  const PhantomSpec ps;
  sections_["phantom"] = {
      {"width_px", std::to_string(ps.width_px)},
      {"height_px", std::to_string(ps.height_px)},
      {"cell_density", num(ps.cell_density)},
      {"nucleus_radius_mean", num(ps.nucleus_radius_mean)},
      {"nucleus_radius_spread", num(ps.nucleus_radius_spread)},
      {"cell_radius_ratio", num(ps.cell_radius_ratio)},
      {"vessel_count", std::to_string(ps.vessel_count)},
      {"vessel_radius", num(ps.vessel_radius)},
      {"rbc_fraction", num(ps.rbc_fraction)},
      {"class_label", to_string(ps.class_label)},
      {"tumor_density_multiplier", num(ps.tumor.density_multiplier)},
      {"tumor_size_multiplier", num(ps.tumor.nucleus_size_multiplier)},
      {"tumor_irregularity", num(ps.tumor.irregularity)},
      {"depth_slices", std::to_string(ps.depth_slices)},
      {"z_spacing_um", num(ps.z_spacing_um)},
      {"dn_cytoplasm", num(ps.index.cytoplasm)},
      {"dn_nucleus", num(ps.index.nucleus)},
      {"dn_vessel", num(ps.index.vessel)},
      {"dn_rbc", num(ps.index.rbc)},
      {"palette", "standard"},
  };
  const AcquisitionSettings acq;
  sections_["acquisition"] = {
      {"shear_px", num(acq.shear_px)},
      {"cutoff", num(acq.cutoff)},
      {"alpha", num(acq.alpha)},
      {"background", num(acq.background)},
      {"noise_sigma", num(acq.noise_sigma)},
      {"phase_scale", num(acq.phase_scale)},
      {"simulate", boolean(acq.simulate)},
      {"pixel_pitch_um", num(0.25)},
      {"dpc_mode", "normalized"},
      {"band_limit", num(0.0)},
  };
  const ConversionSettings conv;
  sections_["preprocess"] = {
      {"p_low", num(conv.preprocess.p_low)},
      {"p_high", num(conv.preprocess.p_high)},
      {"invert", boolean(conv.preprocess.invert)},
      {"upsample", num(1.0)},
      {"source", "phase"},
  };
  sections_["inference"] = {
      {"tile_size", std::to_string(conv.inference.tile_size)},
      {"overlap", num(conv.inference.overlap)},
      {"sigma", num(conv.inference.sigma)},
      {"workers", std::to_string(conv.inference.workers)},
      {"mosaic_order", "stitch_then_convert"},
  };
  auto gan = CycleGANConfig::desk().to_map();
  gan.erase("seed");  // the run seed is global
  for (auto& [key, value] : gan) {
    // shortest round-trip text for readability
    double v = 0.0;
    const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
    if (r.ec == std::errc{} && r.ptr == value.data() + value.size()) value = num(v);
  }
  sections_["cyclegan"] = gan;
  const DataSettings ds;
  sections_["data"] = {
      {"tile_size", std::to_string(ds.tile_size)},
      {"phantom_size", std::to_string(ds.phantom_size)},
      {"x_tiles", std::to_string(ds.x_tiles)},
      {"y_tiles", std::to_string(ds.y_tiles)},
      {"tumor_fraction", num(ds.tumor_fraction)},
      {"upsample", num(ds.upsample)},
      {"palette", ds.palette},
  };
  sections_["finetune"] = {{"epochs", "2"}};
  const ClassifierSettings cs;
  sections_["classifier"] = {
      {"folds", std::to_string(cs.folds)},
      {"tiles_per_class", std::to_string(cs.tiles_per_class)},
      {"tile_size", std::to_string(cs.tile_size)},
      {"epochs", std::to_string(cs.epochs)},
      {"batch_size", std::to_string(cs.batch_size)},
      {"lr", num(cs.lr)},
      {"warmup_fraction", num(cs.warmup_fraction)},
      {"width", std::to_string(cs.width)},
      {"vhe_tiles_per_class", std::to_string(cs.vhe_tiles_per_class)},
  };
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  const auto s = sections_.find(section);
  if (s == sections_.end()) throw ConfigError("unknown config section '" + section + "'");
  const auto k = s->second.find(key);
  if (k == s->second.end()) throw ConfigError("unknown config key '" + section + "." + key + "'");
  k->second = value;
}

void RunConfig::set(const std::string& dotted, const std::string& value) {
  if (dotted == "seed") {
    seed = parse_seed(value, "seed");
    return;
  }
  if (dotted == "out") {
    out = value;
    return;
  }
  const auto dot = dotted.find('.');
  if (dot == std::string::npos) throw ConfigError("expected section.key, got '" + dotted + "'");
  set(dotted.substr(0, dot), dotted.substr(dot + 1), value);
}

void RunConfig::apply_yaml(const std::string& text, const std::string& origin) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (root.IsNull()) return;
  if (!root.IsMap()) throw ConfigError(origin + ": top level must be a mapping");
  for (const auto& entry : root) {
    const std::string name = entry.first.as<std::string>();
    const YAML::Node& node = entry.second;
    if (name == "seed" || name == "out") {
      if (!node.IsScalar()) throw ConfigError(origin + ": '" + name + "' must be a scalar");
      set(name, node.as<std::string>());
      continue;
    }
    if (!sections_.count(name)) throw ConfigError(origin + ": unknown config section '" + name + "'");
    if (node.IsNull()) continue;
    if (!node.IsMap()) throw ConfigError(origin + ": section '" + name + "' must be a mapping");
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      if (!kv.second.IsScalar()) {
        throw ConfigError(origin + ": '" + name + "." + key + "' must be a scalar");
      }
      set(name, key, kv.second.as<std::string>());
    }
  }
}

void RunConfig::apply_yaml_file(const std::filesystem::path& path) {
  apply_yaml(io::read_text(path), path.string());
}

void RunConfig::apply_env(const std::map<std::string, std::string>& env) {
  const std::string prefix = "VHIST_";
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    const std::string rest = name.substr(prefix.size());
    if (rest == "SEED") {
      set("seed", value);
      continue;
    }
    if (rest == "OUT") {
      set("out", value);
      continue;
    }
    const auto us = rest.find('_');
    if (us == std::string::npos) continue;
    const std::string section = lower(rest.substr(0, us));
    if (!sections_.count(section)) continue;
    const std::string key = lower(rest.substr(us + 1));
    try {
      set(section, key, value);
    } catch (const ConfigError&) {
      throw ConfigError("environment variable " + name + " names unknown key '" + section + "." +
                        key + "'");
    }
  }
}

void RunConfig::apply_process_env() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry = *e;
    const auto eq = entry.find('=');
    if (eq != std::string::npos) env[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  apply_env(env);
}

const std::string& RunConfig::get(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) throw ConfigError("unknown config section '" + section + "'");
  const auto k = s->second.find(key);
  if (k == s->second.end()) throw ConfigError("unknown config key '" + section + "." + key + "'");
  return k->second;
}

int RunConfig::get_int(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  int out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw ConfigError(section + "." + key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

double RunConfig::get_double(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw ConfigError(section + "." + key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool RunConfig::get_bool(const std::string& section, const std::string& key) const {
  const std::string v = lower(get(section, key));
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(section + "." + key + ": expected true/false, got '" + v + "'");
}

PhantomSpec RunConfig::phantom() const {
  PhantomSpec s;
  s.width_px = get_int("phantom", "width_px");
  s.height_px = get_int("phantom", "height_px");
  s.cell_density = get_double("phantom", "cell_density");
  s.nucleus_radius_mean = get_double("phantom", "nucleus_radius_mean");
  s.nucleus_radius_spread = get_double("phantom", "nucleus_radius_spread");
  s.cell_radius_ratio = get_double("phantom", "cell_radius_ratio");
  s.vessel_count = get_int("phantom", "vessel_count");
  s.vessel_radius = get_double("phantom", "vessel_radius");
  s.rbc_fraction = get_double("phantom", "rbc_fraction");
  try {
    s.class_label = tissue_class_from_string(get("phantom", "class_label"));
  } catch (const Error& e) {
    throw ConfigError(std::string("phantom.class_label: ") + e.what());
  }
  s.tumor.density_multiplier = get_double("phantom", "tumor_density_multiplier");
  s.tumor.nucleus_size_multiplier = get_double("phantom", "tumor_size_multiplier");
  s.tumor.irregularity = get_double("phantom", "tumor_irregularity");
  s.depth_slices = get_int("phantom", "depth_slices");
  s.z_spacing_um = get_double("phantom", "z_spacing_um");
  s.index.cytoplasm = get_double("phantom", "dn_cytoplasm");
  s.index.nucleus = get_double("phantom", "dn_nucleus");
  s.index.vessel = get_double("phantom", "dn_vessel");
  s.index.rbc = get_double("phantom", "dn_rbc");
  s.seed = seed;
  try {
    s.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("phantom: ") + e.what());
  }
  return s;
}

namespace {
HePalette palette_named(const std::string& name, const std::string& where) {
  if (name == "standard") return HePalette{};
  if (name == "faded") return faded_palette();
  throw ConfigError(where + ": palette must be standard or faded, got '" + name + "'");
}
}  // namespace

HePalette RunConfig::palette() const { return palette_named(get("phantom", "palette"), "phantom.palette"); }

AcquisitionSettings RunConfig::acquisition() const {
  AcquisitionSettings a;
  a.shear_px = get_double("acquisition", "shear_px");
  a.cutoff = get_double("acquisition", "cutoff");
  a.alpha = get_double("acquisition", "alpha");
  a.background = get_double("acquisition", "background");
  a.noise_sigma = get_double("acquisition", "noise_sigma");
  a.phase_scale = get_double("acquisition", "phase_scale");
  a.simulate = get_bool("acquisition", "simulate");
  if (!(a.shear_px > 0)) throw ConfigError("acquisition.shear_px must be positive");
  if (!(a.cutoff > 0 && a.cutoff <= 1)) throw ConfigError("acquisition.cutoff must lie in (0, 1]");
  if (!(a.alpha > 0)) throw ConfigError("acquisition.alpha must be positive");
  if (!(a.background > 0)) throw ConfigError("acquisition.background must be positive");
  if (!(a.noise_sigma >= 0)) throw ConfigError("acquisition.noise_sigma must be nonnegative");
  if (!(a.phase_scale > 0)) throw ConfigError("acquisition.phase_scale must be positive");
  return a;
}

DpcMode RunConfig::dpc_mode() const {
  const std::string& m = get("acquisition", "dpc_mode");
  if (m == "normalized") return DpcMode::normalized;
  if (m == "difference") return DpcMode::difference;
  throw ConfigError("acquisition.dpc_mode must be normalized or difference, got '" + m + "'");
}

double RunConfig::band_limit() const {
  const double b = get_double("acquisition", "band_limit");
  if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("acquisition.band_limit must lie in [0, 1] (0 disables)");
  return b;
}

double RunConfig::pixel_pitch_um() const {
  const double p = get_double("acquisition", "pixel_pitch_um");
  if (!(p > 0)) throw ConfigError("acquisition.pixel_pitch_um must be positive");
  return p;
}

ConversionSettings RunConfig::conversion() const {
  ConversionSettings c;
  c.preprocess.p_low = get_double("preprocess", "p_low");
  c.preprocess.p_high = get_double("preprocess", "p_high");
  c.preprocess.invert = get_bool("preprocess", "invert");
  if (!(c.preprocess.p_low >= 0 && c.preprocess.p_low < c.preprocess.p_high && c.preprocess.p_high <= 100)) {
    throw ConfigError("preprocess: need 0 <= p_low < p_high <= 100");
  }
  const std::string& src = get("preprocess", "source");
  if (src == "phase") c.source = SourceKind::phase;
  else if (src == "dpc") c.source = SourceKind::dpc;
  else if (src == "single_capture") c.source = SourceKind::single_capture;
  else throw ConfigError("preprocess.source must be phase, dpc or single_capture, got '" + src + "'");
  c.inference.tile_size = get_int("inference", "tile_size");
  c.inference.overlap = get_double("inference", "overlap");
  c.inference.sigma = get_double("inference", "sigma");
  c.inference.workers = get_int("inference", "workers");
  if (c.inference.tile_size < 4 || c.inference.tile_size % 4 != 0) {
    throw ConfigError("inference.tile_size must be a positive multiple of 4");
  }
  if (!(c.inference.overlap >= 0 && c.inference.overlap < 1)) {
    throw ConfigError("inference.overlap must lie in [0, 1)");
  }
  if (c.inference.workers < 1) throw ConfigError("inference.workers must be >= 1");
  const std::string& order = get("inference", "mosaic_order");
  if (order == "stitch_then_convert") c.mosaic_order = MosaicOrder::stitch_then_convert;
  else if (order == "convert_then_stitch") c.mosaic_order = MosaicOrder::convert_then_stitch;
  else throw ConfigError("inference.mosaic_order must be stitch_then_convert or convert_then_stitch");
  return c;
}

double RunConfig::upsample_factor() const {
  const double f = get_double("preprocess", "upsample");
  if (!(f >= 1.0)) throw ConfigError("preprocess.upsample must be >= 1");
  return f;
}

CycleGANConfig RunConfig::cyclegan() const {
  CycleGANConfig c = CycleGANConfig::from_map(sections_.at("cyclegan"), CycleGANConfig::desk());
  c.seed = seed;
  return c;
}

DataSettings RunConfig::data() const {
  DataSettings d;
  d.tile_size = get_int("data", "tile_size");
  d.phantom_size = get_int("data", "phantom_size");
  d.x_tiles = get_int("data", "x_tiles");
  d.y_tiles = get_int("data", "y_tiles");
  d.tumor_fraction = get_double("data", "tumor_fraction");
  d.upsample = get_double("data", "upsample");
  d.palette = get("data", "palette");
  palette_named(d.palette, "data.palette");
  if (d.tile_size < 4 || d.tile_size % 4 != 0) throw ConfigError("data.tile_size must be a positive multiple of 4");
  if (d.phantom_size < d.tile_size) throw ConfigError("data.phantom_size must be >= data.tile_size");
  if (d.x_tiles < 1 || d.y_tiles < 1) throw ConfigError("data: tile counts must be >= 1");
  if (!(d.tumor_fraction >= 0 && d.tumor_fraction <= 1)) throw ConfigError("data.tumor_fraction must lie in [0, 1]");
  if (!(d.upsample >= 1)) throw ConfigError("data.upsample must be >= 1");
  return d;
}

ClassifierSettings RunConfig::classifier() const {
  ClassifierSettings c;
  c.folds = get_int("classifier", "folds");
  c.tiles_per_class = get_int("classifier", "tiles_per_class");
  c.tile_size = get_int("classifier", "tile_size");
  c.epochs = get_int("classifier", "epochs");
  c.batch_size = get_int("classifier", "batch_size");
  c.lr = get_double("classifier", "lr");
  c.warmup_fraction = get_double("classifier", "warmup_fraction");
  c.width = get_int("classifier", "width");
  c.vhe_tiles_per_class = get_int("classifier", "vhe_tiles_per_class");
  if (c.folds < 2) throw ConfigError("classifier.folds must be >= 2");
  if (c.tiles_per_class < c.folds) throw ConfigError("classifier.tiles_per_class must be >= folds");
  if (c.tile_size < 8 || c.tile_size % 8 != 0) throw ConfigError("classifier.tile_size must be a multiple of 8");
  if (c.epochs < 1 || c.batch_size < 1 || c.width < 1) {
    throw ConfigError("classifier: epochs, batch_size and width must be >= 1");
  }
  if (!(c.lr > 0)) throw ConfigError("classifier.lr must be positive");
  if (!(c.warmup_fraction >= 0 && c.warmup_fraction < 1)) {
    throw ConfigError("classifier.warmup_fraction must lie in [0, 1)");
  }
  if (c.vhe_tiles_per_class < 1) throw ConfigError("classifier.vhe_tiles_per_class must be >= 1");
  return c;
}

int RunConfig::finetune_epochs() const {
  const int e = get_int("finetune", "epochs");
  if (e < 0) throw ConfigError("finetune.epochs must be nonnegative");
  return e;
}

void RunConfig::validate() const {
  finetune_epochs();
  phantom();
  palette();
  acquisition();
  dpc_mode();
  band_limit();
  pixel_pitch_um();
  conversion();
  upsample_factor();
  cyclegan();
  data();
  classifier();
}

std::string RunConfig::to_yaml() const {
  YAML::Emitter e;
  e << YAML::BeginMap;
  e << YAML::Key << "seed" << YAML::Value << seed;
  e << YAML::Key << "out" << YAML::Value << out.string();
  for (const auto& [section, kv] : sections_) {
    e << YAML::Key << section << YAML::Value << YAML::BeginMap;
    for (const auto& [key, value] : kv) e << YAML::Key << key << YAML::Value << value;
    e << YAML::EndMap;
  }
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace vhist
