// Command-line front end: simulate, preprocess, reconstruct, evaluate,
// export-volume, selftest. Exit codes: 0 ok, 1 validation failure,
// 2 I/O or format error, 64 usage error.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "hypermol/io.hpp"

namespace fs = std::filesystem;
using namespace hypermol;

namespace {

RunConfig load_cfg(const std::string& config_path) {
  if (config_path.empty()) return RunConfig{};
  return load_config_file(config_path);
}

int cmd_simulate(const RunConfig& cfg) {
  cfg.validate();
  GaussianBlobPhantom ph = cfg.make_phantom();
  ShellGrid grid = cfg.make_grid();
  const double px = cfg.effective_pixel_size();

  std::mt19937_64 gen(cfg.seed);
  ImageStack stack;
  stack.count = cfg.image_count;
  stack.N = cfg.N;
  stack.pixel_size = px;
  stack.pixels.resize(static_cast<std::size_t>(cfg.image_count) * cfg.N * cfg.N);
  stack.labels.resize(cfg.image_count);
  for (int i = 0; i < cfg.image_count; ++i) {
    stack.labels[i].rot = random_rotation(gen);
    stack.labels[i].t = uniform01(gen);
  }
  parallel_for(static_cast<std::size_t>(cfg.image_count), cfg.threads,
               [&](std::size_t i) {
                 std::vector<double> img = phantom_projection_image(
                     ph, stack.labels[i].rot, stack.labels[i].t, cfg.N, px);
                 float* dst = stack.image(static_cast<int>(i));
                 for (std::size_t j = 0; j < img.size(); ++j)
                   dst[j] = static_cast<float>(img[j]);
               });
  ImageStack noisy = add_noise(stack, cfg.snr, cfg.seed + 0x9e3779b97f4a7c15ull);
  noisy.labels = stack.labels;

  fs::create_directories(cfg.out_dir);
  write_hvimg(cfg.out_dir + "/images.hvimg", noisy);
  write_labels_csv(cfg.out_dir + "/labels.csv", noisy.labels);
  HyperVolumeCoeffs truth = phantom_to_hypervolume(ph, grid, cfg.basis);
  write_hvvol(cfg.out_dir + "/truth.hvvol", truth);
  atomic_write_file(cfg.out_dir + "/run.config", dump_config(cfg));
  std::cout << "simulate: wrote " << cfg.image_count << " images (N=" << cfg.N
            << ", snr=" << cfg.snr << ") to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_preprocess(const std::string& images_path, const RunConfig& cfg,
                   const std::string& out_path) {
  ImageStack stack = read_hvimg(images_path);
  ShellGrid grid = make_shell_grid(cfg.K, cfg.delta_omega,
                                   cfg.L_max > 0 ? cfg.L_max : cfg.K + 1);
  if (grid.K * grid.delta_omega > kPi / stack.pixel_size + 1e-9)
    throw ConfigError("grid exceeds the stack's Nyquist limit");
  CircleStack circles = polar_fourier_stack(stack, grid, cfg.threads);
  write_hvcir(out_path, circles);
  std::cout << "preprocess: " << circles.count << " images -> " << out_path
            << "\n";
  return 0;
}

int cmd_reconstruct(const std::string& circles_path, const RunConfig& cfg) {
  CircleStack circles = read_hvcir(circles_path);
  ReconstructOptions opts = cfg.make_reconstruct_options();
  ReconstructResult res = reconstruct(circles, opts);
  fs::create_directories(cfg.out_dir);
  write_hvvol(cfg.out_dir + "/reconstruction.hvvol", res.hv);
  write_assignments_csv(cfg.out_dir + "/assignments.csv", res.assignments);
  write_diagnostics_csv(cfg.out_dir + "/diagnostics.csv", res.diagnostics);
  for (const auto& d : res.diagnostics)
    std::cout << "stage " << d.stage << ": K=" << d.K << " Q=" << d.Q
              << " mean_score=" << d.mean_score << "\n";
  std::cout << "reconstruct: wrote " << cfg.out_dir << "/reconstruction.hvvol\n";
  return 0;
}

int cmd_evaluate(const std::string& vol_a, const std::string& vol_b,
                 const std::string& labels_path,
                 const std::string& assignments_path, const std::string& out_dir,
                 int threads) {
  HyperVolumeCoeffs A = read_hvvol(vol_a);
  HyperVolumeCoeffs B = read_hvvol(vol_b);
  fs::create_directories(out_dir);

  std::vector<double> t_eval;
  for (int i = 1; i <= 9; ++i) t_eval.push_back(i / 10.0);
  AlignResult ar = align_global(A, B, t_eval, threads);

  std::vector<std::vector<double>> corr;
  for (double t : t_eval) {
    double ta = ar.flipped_t ? 1.0 - t : t;
    VolumeShellCoeffs a = apply_alignment(instance_at(A, ta), ar);
    corr.push_back(shell_correlation(a, instance_at(B, t)));
  }
  write_shellcorr_csv(out_dir + "/shellcorr.csv", t_eval, corr);

  std::string summary;
  summary += "align_alpha = " + std::to_string(ar.g.alpha) + "\n";
  summary += "align_beta = " + std::to_string(ar.g.beta) + "\n";
  summary += "align_gamma = " + std::to_string(ar.g.gamma) + "\n";
  summary += "reflected = " + std::string(ar.reflected ? "1" : "0") + "\n";
  summary += "flipped_t = " + std::string(ar.flipped_t ? "1" : "0") + "\n";
  summary += "residual = " + std::to_string(ar.residual) + "\n";

  if (!labels_path.empty() && !assignments_path.empty()) {
    std::vector<TruthLabel> labels = read_labels_csv(labels_path);
    std::vector<Assignment> assign = read_assignments_csv(assignments_path);
    if (labels.size() != assign.size())
      throw ConfigError("labels and assignments disagree on image count");
    std::vector<double> tt(labels.size()), te(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      tt[i] = labels[i].t;
      te[assign[i].image_index >= 0 ? assign[i].image_index : i] = assign[i].t;
    }
    ParamMapping mapping = build_param_mapping(tt, te);
    write_mapping_csv(out_dir + "/mapping.csv", mapping);
    write_histogram_csv(out_dir + "/histogram.csv", mapping.histogram);
    double sp = spearman_abs(mapping.pairs);
    DetectorResult det = degenerate_param_detector(te);
    summary += "spearman_abs = " + std::to_string(sp) + "\n";
    summary += "detector_chi2 = " + std::to_string(det.chi2) + "\n";
    summary += "detector_p = " + std::to_string(det.p_value) + "\n";
    summary += "detector_flag = " + std::string(det.flagged ? "1" : "0") + "\n";
    summary += "used_range = " + std::to_string(det.used_range) + "\n";
    std::cout << "evaluate: spearman_abs=" << sp
              << " detector_flag=" << (det.flagged ? 1 : 0) << "\n";
  }
  atomic_write_file(out_dir + "/summary.txt", summary);
  std::cout << "evaluate: wrote reports to " << out_dir << "\n";
  return 0;
}

int cmd_export_volume(const std::string& vol_path, double t, int N,
                      const std::string& mode, const std::string& out_path,
                      int threads) {
  HyperVolumeCoeffs hv = read_hvvol(vol_path);
  VolumeShellCoeffs inst = instance_at(hv, t);
  SynthesisMode m = mode == "direct" ? SynthesisMode::direct
                                     : SynthesisMode::accelerated;
  SynthesisResult grid = synthesize_grid(inst, N, m, threads);
  write_raw_volume(out_path, grid, t, vol_path);
  std::cout << "export-volume: N=" << N << " t=" << t
            << " imag_residual=" << grid.imag_residual << " -> " << out_path
            << "\n";
  return 0;
}

int run_selftest();

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyper-molecule simulation and ab-initio reconstruction"};
  app.require_subcommand(1);

  std::string config_path, images_path, circles_path, out_path;
  std::string vol_a, vol_b, labels_path, assignments_path, mode = "accelerated";
  double t_value = 0.5;
  int N_export = 0, threads = 0;

  // per-flag overrides applied on top of the config file
  auto add_overrides = [&](CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--preset", cfg.preset);
    sub->add_option("--n", cfg.N);
    sub->add_option("--images", cfg.image_count);
    sub->add_option("--snr", cfg.snr);
    sub->add_option("--seed", cfg.seed);
    sub->add_option("--k-shells", cfg.K);
    sub->add_option("--q", cfg.basis.Q);
    sub->add_option("--threads", cfg.threads);
    sub->add_option("--out", cfg.out_dir);
  };

  static RunConfig cfg;

  CLI::App* sim = app.add_subcommand("simulate",
                                     "render a noisy image stack from a phantom");
  add_overrides(sim, cfg);

  CLI::App* pre = app.add_subcommand("preprocess",
                                     "HVIMG1 pixel stack -> HVCIR1 circles");
  pre->add_option("--images", images_path)->required();
  pre->add_option("--config", config_path);
  pre->add_option("--k-shells", cfg.K);
  pre->add_option("--threads", cfg.threads);
  pre->add_option("--out", out_path)->required();

  CLI::App* rec = app.add_subcommand("reconstruct",
                                     "ab-initio hyper-volume from circles");
  rec->add_option("--circles", circles_path)->required();
  add_overrides(rec, cfg);

  CLI::App* ev = app.add_subcommand("evaluate",
                                    "compare two HVVOL1 files and a mapping");
  ev->add_option("--volume", vol_a)->required();
  ev->add_option("--reference", vol_b)->required();
  ev->add_option("--labels", labels_path);
  ev->add_option("--assignments", assignments_path);
  ev->add_option("--threads", threads);
  ev->add_option("--out", out_path)->required();

  CLI::App* ex = app.add_subcommand("export-volume",
                                    "HVVOL1 instance -> raw f32 grid");
  ex->add_option("--volume", vol_a)->required();
  ex->add_option("--t", t_value);
  ex->add_option("--n", N_export)->required();
  ex->add_option("--mode", mode)->check(CLI::IsMember({"direct", "accelerated"}));
  ex->add_option("--threads", threads);
  ex->add_option("--out", out_path)->required();

  app.add_subcommand("selftest", "run the built-in property suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    // config file first, command-line flags on top
    if (!config_path.empty()) {
      RunConfig file_cfg = load_config_file(config_path);
      RunConfig flag_defaults;
      auto keep = [&](auto RunConfig::* f) {
        if (!(cfg.*f == flag_defaults.*f)) file_cfg.*f = cfg.*f;
      };
      keep(&RunConfig::preset);
      keep(&RunConfig::N);
      keep(&RunConfig::image_count);
      keep(&RunConfig::snr);
      keep(&RunConfig::seed);
      keep(&RunConfig::K);
      keep(&RunConfig::threads);
      keep(&RunConfig::out_dir);
      if (cfg.basis.Q != flag_defaults.basis.Q) file_cfg.basis.Q = cfg.basis.Q;
      cfg = file_cfg;
    }

    if (sim->parsed()) return cmd_simulate(cfg);
    if (pre->parsed()) return cmd_preprocess(images_path, cfg, out_path);
    if (rec->parsed()) return cmd_reconstruct(circles_path, cfg);
    if (ev->parsed())
      return cmd_evaluate(vol_a, vol_b, labels_path, assignments_path, out_path,
                          threads);
    if (ex->parsed())
      return cmd_export_volume(vol_a, t_value, N_export, mode, out_path, threads);
    return run_selftest();
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

namespace {

int run_selftest() {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
  };

  // spherical-harmonic orthonormality at L = 8
  {
    const int L = 8;
    SphereQuadrature quad = sphere_quadrature(L);
    double worst = 0.0;
    for (int l = 0; l <= L; ++l)
      for (int m = -l; m <= l; ++m) {
        SHCoeffs c = SHCoeffs::zeros(L);
        c.at(l, m) = 1.0;
        std::vector<cplx> f = evaluate_sh_on_quadrature(c, quad);
        SHCoeffs back = project_to_sh(f, quad, L);
        for (int lp = 0; lp <= L; ++lp)
          for (int mp = -lp; mp <= lp; ++mp) {
            double want = (l == lp && m == mp) ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(back.at(lp, mp) - cplx(want, 0)));
          }
      }
    check("orthonormality L<=8 (1e-10)", worst < 1e-10);
  }

  // Wigner-D homomorphism and unitarity
  {
    std::mt19937_64 gen(11);
    double worst_h = 0.0, worst_u = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      Rotation r1 = random_rotation(gen), r2 = random_rotation(gen);
      Rotation r12 = Rotation::compose(r1, r2);
      for (int l = 0; l <= 6; ++l) {
        WignerBlock D1 = wigner_D(l, r1), D2 = wigner_D(l, r2),
                    D12 = wigner_D(l, r12);
        const int n = 2 * l + 1;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            cplx prod(0, 0), uni(0, 0);
            for (int c = 0; c < n; ++c) {
              prod += D1.d[a * n + c] * D2.d[c * n + b];
              uni += D1.d[a * n + c] * std::conj(D1.d[b * n + c]);
            }
            worst_h = std::max(worst_h, std::abs(prod - D12.d[a * n + b]));
            worst_u = std::max(worst_u,
                               std::abs(uni - (a == b ? cplx(1, 0) : cplx(0, 0))));
          }
      }
    }
    check("wigner-D homomorphism (1e-10)", worst_h < 1e-10);
    check("wigner-D unitarity (1e-12)", worst_u < 1e-12);
  }

  // rotate-then-restrict vs direct equator evaluation
  {
    std::mt19937_64 gen(12);
    const int L = 8;
    SHCoeffs c = SHCoeffs::zeros(L);
    for (auto& v : c.a) v = cplx(normal01(gen), normal01(gen));
    Rotation rot = random_rotation(gen);
    SHCoeffs rc = rotate_sh(c, rot);
    std::vector<cplx> h = restrict_equator(rc);
    double worst = 0.0;
    for (int i = 0; i < 32; ++i) {
      double phi = kTwoPi * i / 32;
      cplx direct = evaluate_sh(rc, kPi / 2, phi);
      cplx series(0, 0);
      for (int m = -L; m <= L; ++m)
        series += h[m + L] * std::polar(1.0, m * phi);
      worst = std::max(worst, std::abs(direct - series));
    }
    check("rotate+restrict equator (1e-8)", worst < 1e-8);
  }

  // gradient vs central finite differences
  {
    std::mt19937_64 gen(13);
    ShellGrid grid = make_shell_grid(4, kPi, 5);
    ParamBasisSpec basis{ParamBasisKind::legendre, 2};
    HyperVolumeCoeffs hv = HyperVolumeCoeffs::zeros(grid, basis);
    for (auto& v : hv.data) v = cplx(normal01(gen), normal01(gen));
    ImageCircleCoeffs img = ImageCircleCoeffs::zeros(grid);
    for (auto& v : img.a) v = cplx(normal01(gen), normal01(gen));
    Rotation rot = random_rotation(gen);
    const double t = 0.3, hstep = 1e-5;
    ObjectiveGradient og = objective_and_gradient(hv, img, rot, t, 4, 2);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      std::size_t j = static_cast<std::size_t>(uniform01(gen) * hv.data.size());
      HyperVolumeCoeffs hp = hv, hm = hv;
      hp.data[j] += hstep;
      hm.data[j] -= hstep;
      double fd = (objective_and_gradient(hp, img, rot, t, 4, 2).cost -
                   objective_and_gradient(hm, img, rot, t, 4, 2).cost) /
                  (2 * hstep);
      worst = std::max(worst, std::abs(fd - og.grad[j].real()) /
                                  std::max(1e-12, std::abs(og.grad[j].real())));
    }
    check("gradient finite differences (1e-5)", worst < 1e-5);
  }

  std::cout << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace
