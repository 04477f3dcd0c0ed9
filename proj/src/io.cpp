#include "hypermol/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hypermol {

namespace {

// little-endian packing, independent of host byte order
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& out, float v) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  put_u32(out, u);
}
void put_f64(std::string& out, double v) {
  std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string path;

  void need(std::size_t n) const {
    if (pos + n > buf.size())
      throw FormatError(path + ": truncated at offset " + std::to_string(pos));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(v);
  }
  void done() const {
    if (pos != buf.size())
      throw FormatError(path + ": trailing bytes at offset " + std::to_string(pos));
  }
};

void check_magic(Reader& r, const char* stem) {
  r.need(8);
  // first five bytes name the format, byte six is the version digit
  if (std::memcmp(r.buf.data(), stem, 5) != 0 || r.buf[6] != '\0' || r.buf[7] != '\0')
    throw FormatError(r.path + ": bad magic");
  if (r.buf[5] != '1')
    throw FormatError(r.path + ": unsupported version '" +
                      std::string(1, r.buf[5]) + "'");
  r.pos = 8;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void atomic_write_file(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(path + ": write failed");
  }
  fs::rename(tmp, p);
}

void write_hvimg(const std::string& path, const ImageStack& stack) {
  std::string out;
  out.reserve(24 + stack.pixels.size() * 4);
  out.append("HVIMG1\0\0", 8);
  put_u32(out, static_cast<std::uint32_t>(stack.count));
  put_u32(out, static_cast<std::uint32_t>(stack.N));
  put_f64(out, stack.pixel_size);
  for (float v : stack.pixels) put_f32(out, v);
  atomic_write_file(path, out);
}

ImageStack read_hvimg(const std::string& path) {
  std::string buf = slurp(path);
  Reader r{buf, 0, path};
  check_magic(r, "HVIMG");
  ImageStack s;
  s.count = static_cast<int>(r.u32());
  s.N = static_cast<int>(r.u32());
  s.pixel_size = r.f64();
  const std::size_t n = static_cast<std::size_t>(s.count) * s.N * s.N;
  s.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.pixels[i] = r.f32();
  r.done();
  return s;
}

namespace {

void put_grid(std::string& out, const ShellGrid& g) {
  put_f64(out, g.delta_omega);
  for (int k = 1; k <= g.K; ++k) put_u32(out, static_cast<std::uint32_t>(g.band(k)));
}

ShellGrid read_grid(Reader& r, int K, double delta_omega) {
  ShellGrid g;
  g.K = K;
  g.delta_omega = delta_omega;
  g.p.resize(K);
  for (int k = 0; k < K; ++k) g.p[k] = static_cast<int>(r.u32());
  try {
    g.validate();
  } catch (const std::exception& e) {
    throw FormatError(r.path + ": bad shell table (" + e.what() + ")");
  }
  return g;
}

}  // namespace

void write_hvcir(const std::string& path, const CircleStack& stack) {
  std::string out;
  out.append("HVCIR1\0\0", 8);
  put_u32(out, static_cast<std::uint32_t>(stack.count));
  put_u32(out, static_cast<std::uint32_t>(stack.grid.K));
  put_grid(out, stack.grid);
  for (int i = 0; i < stack.count; ++i) {
    const cplx* a = stack.image(i);
    for (std::size_t j = 0; j < stack.grid.circles_size(); ++j) {
      put_f32(out, static_cast<float>(a[j].real()));
      put_f32(out, static_cast<float>(a[j].imag()));
    }
    put_f32(out, static_cast<float>(stack.dc[i]));
  }
  atomic_write_file(path, out);
}

CircleStack read_hvcir(const std::string& path) {
  std::string buf = slurp(path);
  Reader r{buf, 0, path};
  check_magic(r, "HVCIR");
  CircleStack s;
  s.count = static_cast<int>(r.u32());
  const int K = static_cast<int>(r.u32());
  const double dw = r.f64();
  s.grid = read_grid(r, K, dw);
  const std::size_t csz = s.grid.circles_size();
  s.data.resize(static_cast<std::size_t>(s.count) * csz);
  s.dc.resize(s.count);
  for (int i = 0; i < s.count; ++i) {
    for (std::size_t j = 0; j < csz; ++j) {
      double re = r.f32(), im = r.f32();
      s.data[static_cast<std::size_t>(i) * csz + j] = cplx(re, im);
    }
    s.dc[i] = r.f32();
  }
  r.done();
  return s;
}

void write_hvvol(const std::string& path, const HyperVolumeCoeffs& hv) {
  std::string out;
  out.append("HVVOL1\0\0", 8);
  put_u32(out, static_cast<std::uint32_t>(hv.grid.K));
  put_u32(out, static_cast<std::uint32_t>(hv.basis.Q));
  put_u32(out, static_cast<std::uint32_t>(hv.basis.kind));
  put_grid(out, hv.grid);
  for (const cplx& v : hv.data) {
    put_f32(out, static_cast<float>(v.real()));
    put_f32(out, static_cast<float>(v.imag()));
  }
  for (double d : hv.dc) put_f32(out, static_cast<float>(d));
  atomic_write_file(path, out);
}

HyperVolumeCoeffs read_hvvol(const std::string& path) {
  std::string buf = slurp(path);
  Reader r{buf, 0, path};
  check_magic(r, "HVVOL");
  const int K = static_cast<int>(r.u32());
  const int Q = static_cast<int>(r.u32());
  const std::uint32_t kind = r.u32();
  if (kind > 2) throw FormatError(path + ": unknown basis kind");
  const double dw = r.f64();
  ShellGrid grid = read_grid(r, K, dw);
  ParamBasisSpec basis{static_cast<ParamBasisKind>(kind), Q};
  HyperVolumeCoeffs hv = HyperVolumeCoeffs::zeros(grid, basis);
  for (cplx& v : hv.data) {
    double re = r.f32(), im = r.f32();
    v = cplx(re, im);
  }
  for (double& d : hv.dc) d = r.f32();
  r.done();
  return hv;
}

// --------------------------------- CSV ------------------------------------

void write_labels_csv(const std::string& path,
                      const std::vector<TruthLabel>& labels) {
  std::string out = "image_index,alpha,beta,gamma,t\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(i) + "," + fmt_double(labels[i].rot.alpha) + "," +
           fmt_double(labels[i].rot.beta) + "," + fmt_double(labels[i].rot.gamma) +
           "," + fmt_double(labels[i].t) + "\n";
  }
  atomic_write_file(path, out);
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path,
                                                    std::size_t min_cols) {
  std::string buf = slurp(path);
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(buf);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cols.push_back(c);
    if (cols.size() < min_cols)
      throw FormatError(path + ": short CSV row '" + line + "'");
    rows.push_back(std::move(cols));
  }
  return rows;
}

double to_double(const std::string& s, const std::string& path) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == 0) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(path + ": bad number '" + s + "'");
  }
}

}  // namespace

std::vector<TruthLabel> read_labels_csv(const std::string& path) {
  std::vector<TruthLabel> out;
  for (const auto& row : read_csv_rows(path, 5)) {
    TruthLabel l;
    l.rot.alpha = to_double(row[1], path);
    l.rot.beta = to_double(row[2], path);
    l.rot.gamma = to_double(row[3], path);
    l.t = to_double(row[4], path);
    out.push_back(l);
  }
  return out;
}

void write_assignments_csv(const std::string& path,
                           const std::vector<Assignment>& assignments) {
  std::string out = "image_index,alpha,beta,gamma,t,score\n";
  for (const auto& a : assignments) {
    out += std::to_string(a.image_index) + "," + fmt_double(a.rot.alpha) + "," +
           fmt_double(a.rot.beta) + "," + fmt_double(a.rot.gamma) + "," +
           fmt_double(a.t) + "," + fmt_double(a.score) + "\n";
  }
  atomic_write_file(path, out);
}

std::vector<Assignment> read_assignments_csv(const std::string& path) {
  std::vector<Assignment> out;
  for (const auto& row : read_csv_rows(path, 6)) {
    Assignment a;
    a.image_index = static_cast<int>(to_double(row[0], path));
    a.rot.alpha = to_double(row[1], path);
    a.rot.beta = to_double(row[2], path);
    a.rot.gamma = to_double(row[3], path);
    a.t = to_double(row[4], path);
    a.score = to_double(row[5], path);
    out.push_back(a);
  }
  return out;
}

void write_diagnostics_csv(const std::string& path,
                           const std::vector<StageDiag>& diags) {
  std::string out = "stage,K,Q,iters,step,mean_score,images_seen,zero_circles";
  const int bins = diags.empty() ? 20 : static_cast<int>(diags[0].t_hist.size());
  for (int b = 0; b < bins; ++b) out += ",thist_" + std::to_string(b);
  out += "\n";
  for (const auto& d : diags) {
    out += std::to_string(d.stage) + "," + std::to_string(d.K) + "," +
           std::to_string(d.Q) + "," + std::to_string(d.iters) + "," +
           fmt_double(d.step) + "," + fmt_double(d.mean_score) + "," +
           std::to_string(d.images_seen) + "," +
           std::to_string(d.zero_circle_images);
    for (int v : d.t_hist) out += "," + std::to_string(v);
    out += "\n";
  }
  atomic_write_file(path, out);
}

void write_mapping_csv(const std::string& path, const ParamMapping& mapping) {
  std::string out = "t_true,t_est\n";
  for (const auto& [tt, te] : mapping.pairs)
    out += fmt_double(tt) + "," + fmt_double(te) + "\n";
  atomic_write_file(path, out);
}

void write_histogram_csv(const std::string& path,
                         const std::vector<int>& histogram) {
  std::string out = "bin,count\n";
  for (std::size_t b = 0; b < histogram.size(); ++b)
    out += std::to_string(b) + "," + std::to_string(histogram[b]) + "\n";
  atomic_write_file(path, out);
}

void write_shellcorr_csv(const std::string& path,
                         const std::vector<double>& t_samples,
                         const std::vector<std::vector<double>>& corr_per_t) {
  std::string out = "t,k,corr\n";
  for (std::size_t i = 0; i < t_samples.size(); ++i)
    for (std::size_t k = 0; k < corr_per_t[i].size(); ++k)
      out += fmt_double(t_samples[i]) + "," + std::to_string(k + 1) + "," +
             fmt_double(corr_per_t[i][k]) + "\n";
  atomic_write_file(path, out);
}

void write_raw_volume(const std::string& path, const SynthesisResult& grid,
                      double t, const std::string& source) {
  std::string out;
  out.reserve(grid.values.size() * 4);
  for (double v : grid.values) put_f32(out, static_cast<float>(v));
  atomic_write_file(path, out);

  std::string meta;
  meta += "format = raw_f32\n";
  meta += "n = " + std::to_string(grid.N) + "\n";
  meta += "order = x_fastest\n";
  meta += "t = " + fmt_double(t) + "\n";
  meta += "imag_residual = " + fmt_double(grid.imag_residual) + "\n";
  meta += "source = " + source + "\n";
  atomic_write_file(path + ".meta", meta);
}

// ------------------------------- config -----------------------------------

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

Vec3 parse_vec3(const std::string& s) {
  std::istringstream in(s);
  Vec3 v;
  if (!(in >> v.x >> v.y >> v.z)) throw ConfigError("bad vector '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("bad boolean '" + s + "'");
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line without '=': " + line);
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  RunConfig cfg;
  auto geti = [&](const char* key, int& dst) {
    auto it = kv.find(key);
    if (it != kv.end()) dst = static_cast<int>(to_double(it->second, "config"));
  };
  auto getd = [&](const char* key, double& dst) {
    auto it = kv.find(key);
    if (it != kv.end()) dst = to_double(it->second, "config");
  };
  auto getb = [&](const char* key, bool& dst) {
    auto it = kv.find(key);
    if (it != kv.end()) dst = parse_bool(it->second);
  };

  if (auto it = kv.find("preset"); it != kv.end()) cfg.preset = it->second;
  geti("n", cfg.N);
  getd("pixel_size", cfg.pixel_size);
  geti("images", cfg.image_count);
  getd("snr", cfg.snr);
  if (auto it = kv.find("seed"); it != kv.end())
    cfg.seed = std::strtoull(it->second.c_str(), nullptr, 10);
  geti("K", cfg.K);
  getd("delta_omega", cfg.delta_omega);
  geti("L_max", cfg.L_max);
  if (auto it = kv.find("basis"); it != kv.end())
    cfg.basis.kind = param_basis_kind_from_string(it->second);
  geti("Q", cfg.basis.Q);
  geti("iters_per_stage", cfg.iters_per_stage);
  getd("base_step", cfg.base_step);
  geti("sphere_samples", cfg.sphere_samples);
  geti("t_samples", cfg.t_samples);
  geti("minibatch", cfg.minibatch);
  geti("final_sphere_samples", cfg.final_sphere_samples);
  geti("gamma_grid", cfg.gamma_grid);
  getb("stratified_t", cfg.stratified_t);
  getb("reparam_uniform", cfg.reparam_uniform);
  geti("threads", cfg.threads);
  if (auto it = kv.find("out"); it != kv.end()) cfg.out_dir = it->second;

  // explicit schedule rows: schedule.<i>.{K,Q,iters,step}
  for (int i = 0;; ++i) {
    std::string stem = "schedule." + std::to_string(i) + ".";
    auto itK = kv.find(stem + "K");
    if (itK == kv.end()) break;
    MarchingStage st;
    st.K = static_cast<int>(to_double(itK->second, "config"));
    if (auto it = kv.find(stem + "Q"); it != kv.end())
      st.Q = static_cast<int>(to_double(it->second, "config"));
    if (auto it = kv.find(stem + "iters"); it != kv.end())
      st.iters = static_cast<int>(to_double(it->second, "config"));
    if (auto it = kv.find(stem + "step"); it != kv.end())
      st.step = to_double(it->second, "config");
    cfg.schedule.stages.push_back(st);
  }

  // blob table overrides the preset
  for (int i = 0;; ++i) {
    std::string stem = "blob." + std::to_string(i) + ".";
    auto itS = kv.find(stem + "sigma");
    if (itS == kv.end()) break;
    GaussianBlob b;
    b.sigma = to_double(itS->second, "config");
    if (auto it = kv.find(stem + "amplitude"); it != kv.end())
      b.amplitude = to_double(it->second, "config");
    if (auto it = kv.find(stem + "c0"); it != kv.end()) b.c0 = parse_vec3(it->second);
    if (auto it = kv.find(stem + "c1"); it != kv.end()) b.c1 = parse_vec3(it->second);
    if (auto it = kv.find(stem + "c2"); it != kv.end()) b.c2 = parse_vec3(it->second);
    if (auto it = kv.find(stem + "c3"); it != kv.end()) b.c3 = parse_vec3(it->second);
    cfg.blobs.push_back(b);
  }
  if (!cfg.blobs.empty()) cfg.preset.clear();
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  auto kv = [&out](const std::string& k, const std::string& v) {
    out += k + " = " + v + "\n";
  };
  if (!cfg.preset.empty()) kv("preset", cfg.preset);
  kv("n", std::to_string(cfg.N));
  if (cfg.pixel_size > 0) kv("pixel_size", fmt_double(cfg.pixel_size));
  kv("images", std::to_string(cfg.image_count));
  kv("snr", fmt_double(cfg.snr));
  kv("seed", std::to_string(cfg.seed));
  kv("K", std::to_string(cfg.K));
  kv("delta_omega", fmt_double(cfg.delta_omega));
  if (cfg.L_max > 0) kv("L_max", std::to_string(cfg.L_max));
  kv("basis", to_string(cfg.basis.kind));
  kv("Q", std::to_string(cfg.basis.Q));
  kv("iters_per_stage", std::to_string(cfg.iters_per_stage));
  kv("base_step", fmt_double(cfg.base_step));
  kv("sphere_samples", std::to_string(cfg.sphere_samples));
  kv("t_samples", std::to_string(cfg.t_samples));
  kv("minibatch", std::to_string(cfg.minibatch));
  kv("final_sphere_samples", std::to_string(cfg.final_sphere_samples));
  kv("gamma_grid", std::to_string(cfg.gamma_grid));
  kv("stratified_t", cfg.stratified_t ? "1" : "0");
  kv("reparam_uniform", cfg.reparam_uniform ? "1" : "0");
  kv("threads", std::to_string(cfg.threads));
  for (std::size_t i = 0; i < cfg.schedule.stages.size(); ++i) {
    const auto& st = cfg.schedule.stages[i];
    std::string stem = "schedule." + std::to_string(i) + ".";
    kv(stem + "K", std::to_string(st.K));
    kv(stem + "Q", std::to_string(st.Q));
    kv(stem + "iters", std::to_string(st.iters));
    kv(stem + "step", fmt_double(st.step));
  }
  for (std::size_t i = 0; i < cfg.blobs.size(); ++i) {
    const auto& b = cfg.blobs[i];
    std::string stem = "blob." + std::to_string(i) + ".";
    kv(stem + "amplitude", fmt_double(b.amplitude));
    kv(stem + "sigma", fmt_double(b.sigma));
    auto v3 = [](const Vec3& v) {
      return fmt_double(v.x) + " " + fmt_double(v.y) + " " + fmt_double(v.z);
    };
    kv(stem + "c0", v3(b.c0));
    kv(stem + "c1", v3(b.c1));
    kv(stem + "c2", v3(b.c2));
    kv(stem + "c3", v3(b.c3));
  }
  return out;
}

void RunConfig::validate() const {
  if (N < 3) throw ConfigError("n must be >= 3");
  if (image_count < 1) throw ConfigError("images must be positive");
  if (!(snr > 0)) throw ConfigError("snr must be positive");
  if (K < 1) throw ConfigError("K must be >= 1");
  if (!(delta_omega > 0)) throw ConfigError("delta_omega must be positive");
  if (basis.Q < 0) throw ConfigError("Q must be >= 0");
  if (sphere_samples < 1 || t_samples < 1 || minibatch < 1 ||
      final_sphere_samples < 1)
    throw ConfigError("sampling counts must be positive");
  if (K * delta_omega > kPi / effective_pixel_size() + 1e-9)
    throw ConfigError("K * delta_omega exceeds the Nyquist limit pi/pixel_size");
  if (preset.empty() && blobs.empty())
    throw ConfigError("no phantom: set preset or a blob table");
  try {
    ShellGrid g = make_grid();
    MarchingSchedule sch = make_reconstruct_options().schedule;
    sch.validate(g.K, basis.Q);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

ShellGrid RunConfig::make_grid() const {
  return make_shell_grid(K, delta_omega, L_max > 0 ? L_max : K + 1);
}

GaussianBlobPhantom RunConfig::make_phantom() const {
  if (!blobs.empty()) {
    GaussianBlobPhantom ph;
    ph.blobs = blobs;
    return ph;
  }
  if (preset == "cat") return cat_preset();
  throw ConfigError("unknown phantom preset '" + preset + "'");
}

ReconstructOptions RunConfig::make_reconstruct_options() const {
  ReconstructOptions o;
  o.basis = basis;
  o.schedule = schedule.stages.empty()
                   ? default_schedule(K, basis.Q, iters_per_stage, base_step)
                   : schedule;
  o.sphere_samples = sphere_samples;
  o.t_samples = t_samples;
  o.minibatch = minibatch;
  o.seed = seed;
  o.threads = threads;
  o.stratified_t = stratified_t;
  o.reparam_uniform = reparam_uniform;
  o.final_sphere_samples = final_sphere_samples;
  o.match.gamma_grid = gamma_grid;
  return o;
}

}  // namespace hypermol
