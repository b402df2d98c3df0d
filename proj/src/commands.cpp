#include "cbc/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numbers>
#include <optional>

#include "cbc/errors.hpp"
#include "cbc/io.hpp"
#include "cbc/oracle.hpp"
#include "cbc/parallel.hpp"

namespace cbc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string freq_tag(double omega) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", omega / kTwoPi);
    return buf;
}

std::string gamma_tag(double gamma) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", gamma);
    return buf;
}

void write_snapshot(const CommandContext& ctx) {
    write_text(config_snapshot(ctx.config), ctx.out_dir / "config_used.ini");
}

int report_failures(const std::vector<std::string>& failures) {
    for (const auto& f : failures) std::cerr << "error: " << f << "\n";
    return failures.empty() ? 0 : 1;
}

// Seed streams per command keep sub-seeds disjoint across subcommands.
enum SeedStream : std::uint64_t {
    kSweepStream = 1,
    kFloquetStream = 2,
    kEscapeStream = 3,
    kStudyStream = 4,
    kSurfaceStream = 5,
};

}  // namespace

Rig make_rig(const ExperimentConfig& config) { return Rig(config.rig, config.controller); }

std::pair<int, int> unstable_segment(const ContinuationRun& run) {
    int first = -1, last = -1;
    for (int i = 0; i < static_cast<int>(run.points.size()); ++i) {
        if (run.points[i].stable.has_value() && !*run.points[i].stable) {
            if (first < 0) first = i;
            last = i;
        }
    }
    return {first, last};
}

int cmd_sweep(const CommandContext& ctx) {
    const auto freqs = ctx.config.sweep_frequencies_hz();
    const auto grid = ctx.config.amplitude_grid();
    std::vector<ContinuationRun> runs(freqs.size());
    std::vector<std::string> failures;
    std::mutex mtx;

    parallel_for(freqs.size(), ctx.jobs, [&](std::size_t i) {
        const double omega = kTwoPi * freqs[i];
        try {
            Rig rig = make_rig(ctx.config);
            ContinuationRun run = continuation_sweep(rig, omega, grid, ctx.config.sweep.engine);
            run.seed = split_seed(ctx.config.master_seed, kSweepStream, i);
            if (!run.aborted_reason.empty()) {
                std::lock_guard lock(mtx);
                failures.push_back("sweep at " + freq_tag(omega) + " Hz aborted: " +
                                   run.aborted_reason);
            }
            runs[i] = std::move(run);
        } catch (const Error& e) {
            std::lock_guard lock(mtx);
            failures.push_back("sweep at " + freq_tag(omega) + " Hz failed: " + e.what());
        }
    });

    auto combined = std::ofstream();
    std::filesystem::create_directories(ctx.out_dir);
    combined.open(ctx.out_dir / "sweep_combined.csv", std::ios::binary);
    combined << "omega,gamma,response_amplitude,residual\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (runs[i].points.empty() && runs[i].amplitude_grid.empty()) continue;  // failed slot
        const std::string tag = freq_tag(kTwoPi * freqs[i]);
        write_run_csv(runs[i], ctx.out_dir / ("sweep_f" + tag + ".csv"));
        write_run_json(runs[i], ctx.out_dir / ("sweep_f" + tag + ".json"));
        for (const auto& p : runs[i].points) {
            combined << format_g17(p.omega) << ',' << format_g17(p.gamma) << ','
                     << format_g17(response_amplitude(p.response)) << ','
                     << format_g17(p.residual) << '\n';
        }
    }
    combined.close();
    write_snapshot(ctx);
    return report_failures(failures);
}

namespace {

const ContinuationRun* nearest_run(const std::vector<ContinuationRun>& runs, double omega) {
    const ContinuationRun* best = nullptr;
    for (const auto& r : runs)
        if (!best || std::abs(r.omega - omega) < std::abs(best->omega - omega)) best = &r;
    return best;
}

std::vector<ContinuationRun> load_runs(const std::vector<std::filesystem::path>& files) {
    std::vector<ContinuationRun> runs;
    for (const auto& f : files) runs.push_back(read_run_json(f));
    if (runs.empty()) throw ConfigError("no sweep files given");
    return runs;
}

}  // namespace

int cmd_floquet(const CommandContext& ctx,
                const std::vector<std::filesystem::path>& sweep_jsons) {
    const auto runs = load_runs(sweep_jsons);
    ContinuationRun branch = *nearest_run(runs, kTwoPi * ctx.config.floquet.freq_hz);
    const std::string tag = freq_tag(branch.omega);
    std::vector<std::string> failures;
    std::mutex mtx;

    for (int rep = 0; rep < ctx.config.floquet.branch_repeats; ++rep) {
        std::vector<std::optional<FloquetEstimate>> estimates(branch.points.size());
        parallel_for(branch.points.size(), ctx.jobs, [&](std::size_t i) {
            try {
                SysidConfig cfg = ctx.config.sysid;
                cfg.seed = split_seed(ctx.config.master_seed, kFloquetStream,
                                      static_cast<std::uint64_t>(rep) * 1000003 + i);
                estimates[i] = estimate_floquet(make_rig(ctx.config), branch.points[i], cfg);
            } catch (const Error& e) {
                std::lock_guard lock(mtx);
                failures.push_back("floquet point " + std::to_string(i) + " rep " +
                                   std::to_string(rep) + ": " + e.what());
            }
        });

        std::ofstream csv(ctx.out_dir / ("floquet_f" + tag + "_run" + std::to_string(rep) +
                                         ".csv"),
                          std::ios::binary);
        csv << "omega,response_amplitude,mu_abs_1,mu_abs_2,stable\n";
        for (std::size_t i = 0; i < branch.points.size(); ++i) {
            if (!estimates[i]) continue;
            const auto& est = *estimates[i];
            csv << format_g17(branch.omega) << ','
                << format_g17(response_amplitude(branch.points[i].response)) << ','
                << format_g17(est.mean_abs[0]) << ',' << format_g17(est.mean_abs[1]) << ','
                << (est.stable ? 1 : 0) << '\n';
            if (rep == 0) branch.points[i].stable = est.stable;
        }
    }

    write_run_csv(branch, ctx.out_dir / ("branch_f" + tag + "_annotated.csv"));
    write_run_json(branch, ctx.out_dir / ("branch_f" + tag + "_annotated.json"));
    write_snapshot(ctx);
    return report_failures(failures);
}

int cmd_oracle(const CommandContext& ctx, const std::filesystem::path& run_json) {
    const ContinuationRun run = read_run_json(run_json);
    const std::string tag = freq_tag(run.omega);
    std::vector<std::string> failures;
    std::mutex mtx;

    struct Row {
        VariationalResult var;
        double bf_max_diff = 0.0;
        double amplitude = 0.0;
        bool ok = false;
    };
    std::vector<Row> rows(run.points.size());

    parallel_for(run.points.size(), ctx.jobs, [&](std::size_t i) {
        const auto& p = run.points[i];
        try {
            const OrbitInput input{p.gamma, run.omega, p.phase};
            const RigState refined = refine_orbit_shooting(ctx.config.rig, input, p.state);
            rows[i].var = variational_multipliers(ctx.config.rig, input, refined);
            const double eps = 1e-6 * std::max(response_amplitude(p.response), 1e-3);
            const Eigen::Matrix2d bf = brute_force_monodromy(ctx.config.rig, input, refined, eps);
            rows[i].bf_max_diff = (bf - rows[i].var.monodromy).cwiseAbs().maxCoeff();
            rows[i].amplitude = response_amplitude(p.response);
            rows[i].ok = true;
        } catch (const Error& e) {
            std::lock_guard lock(mtx);
            failures.push_back("oracle point " + std::to_string(i) + ": " + e.what());
        }
    });

    std::filesystem::create_directories(ctx.out_dir);
    std::ofstream csv(ctx.out_dir / ("oracle_f" + tag + ".csv"), std::ios::binary);
    csv << "omega,response_amplitude,mu1_re,mu1_im,mu2_re,mu2_im,stable,bruteforce_max_diff\n";
    nlohmann::json jout = nlohmann::json::array();
    for (const auto& row : rows) {
        if (!row.ok) continue;
        const auto& mu = row.var.multipliers;
        csv << format_g17(run.omega) << ',' << format_g17(row.amplitude) << ','
            << format_g17(mu[0].real()) << ',' << format_g17(mu[0].imag()) << ','
            << format_g17(mu[1].real()) << ',' << format_g17(mu[1].imag()) << ','
            << (std::abs(mu[0]) <= 1.0 ? 1 : 0) << ',' << format_g17(row.bf_max_diff) << '\n';
        jout.push_back(oracle_to_json(row.var));
    }
    csv.close();
    write_text(jout.dump(2) + "\n", ctx.out_dir / ("oracle_f" + tag + ".json"));
    write_snapshot(ctx);
    return report_failures(failures);
}

int cmd_escape(const CommandContext& ctx, const std::filesystem::path& annotated_run_json) {
    const ContinuationRun run = read_run_json(annotated_run_json);
    const auto& esc = ctx.config.escape;
    const auto [first, last] = unstable_segment(run);
    if (first < 0) throw ConfigError("run carries no unstable points; run `floquet` first");
    const int orbit_index = esc.orbit_index >= 0 ? esc.orbit_index : (first + last) / 2;
    if (orbit_index < first || orbit_index > last)
        throw ConfigError("orbit_index " + std::to_string(orbit_index) + " is not unstable");
    const ContinuationPoint& orbit = run.points[orbit_index];
    const double period = 2.0 * std::numbers::pi / run.omega;
    const double tau = esc.delay_fraction * period;

    // Eigendirections from the closed-loop estimate on this orbit.
    SysidConfig sysid_cfg = ctx.config.sysid;
    sysid_cfg.seed = split_seed(ctx.config.master_seed, kEscapeStream, 0xD1A);
    const FloquetEstimate est = estimate_floquet(make_rig(ctx.config), orbit, sysid_cfg);
    const FloquetResult& floq = est.result();
    const int delay_arx =
        static_cast<int>(std::llround(esc.delay_fraction * sysid_cfg.m_samples));
    if (delay_arx < 1 || delay_arx >= floq.n_order)
        throw ConfigError("delay_fraction * m must land inside the ARX order for the overlay");
    const auto direction_of = [&](int which) {
        Eigen::Vector2d d(floq.eigendirections(0, which).real(),
                          floq.eigendirections(delay_arx, which).real());
        return d.normalized();
    };
    const Eigen::Vector2d unstable_dir = direction_of(0);
    const Eigen::Vector2d stable_dir = direction_of(1);

    // Section coordinates (x(kT), x(kT - tau)) of the orbit and attractors.
    const auto section_point = [&](const FourierSeries& series) {
        return Eigen::Vector2d(series.value(0.0), series.value(-tau));
    };
    const Eigen::Vector2d orbit_pt = section_point(orbit.response);
    const auto closest_stable = [&](int from, int to, int step) -> const ContinuationPoint* {
        const ContinuationPoint* best = nullptr;
        for (int i = from; i != to; i += step) {
            const auto& p = run.points[i];
            if (!p.stable.has_value() || !*p.stable) continue;
            if (!best || std::abs(p.gamma - orbit.gamma) < std::abs(best->gamma - orbit.gamma))
                best = &p;
        }
        return best;
    };
    const ContinuationPoint* low = closest_stable(0, first, 1);
    const ContinuationPoint* high =
        closest_stable(static_cast<int>(run.points.size()) - 1, last, -1);
    if (!low || !high) throw ConfigError("branch lacks stable points on both sides of the fold");
    const double amp_low = response_amplitude(low->response);
    const double amp_high = response_amplitude(high->response);

    const Forcing open_loop{orbit.gamma * std::cos(orbit.phase),
                            -orbit.gamma * std::sin(orbit.phase), run.omega};
    const int grid_multiple = std::max(10, sysid_cfg.m_samples);

    struct EscapeResult {
        std::vector<std::pair<double, double>> poincare;  // (x(kT), x(kT - tau))
        std::vector<double> ts_t, ts_x;                   // decimated time series
        int label = -1;                                   // 0 low, 1 high, -1 timeout
        int periods = 0;
    };
    std::vector<EscapeResult> results(esc.runs);
    std::vector<std::string> failures;
    std::mutex mtx;

    parallel_for(static_cast<std::size_t>(esc.runs), ctx.jobs, [&](std::size_t r) {
        try {
            Rig rig = make_rig(ctx.config);
            rig.set_state(orbit.state);
            rig.run_segment(orbit.target.series, Forcing{0.0, 0.0, run.omega}, 10, grid_multiple);

            ControllerConfig off = rig.controller();
            off.enabled = false;
            rig.set_controller(off);
            NoiseConfig noise = ctx.config.noise;
            noise.amplitude = esc.noise_amplitude;
            noise.seed = split_seed(ctx.config.master_seed, kEscapeStream, 1000 + r);
            rig.set_noise(noise);

            EscapeResult& res = results[r];
            SampledRecord prev;
            int in_band = 0, band_label = -1;
            for (int k = 0; k < esc.max_periods; ++k) {
                SampledRecord rec =
                    rig.run_segment(FourierSeries(run.omega, 1), open_loop, 1, grid_multiple);
                const int per = rec.samples_per_period;
                const int delay = per / std::max(1, static_cast<int>(std::llround(
                                                        1.0 / esc.delay_fraction)));
                if (k > 0)
                    res.poincare.emplace_back(rec.x.front(),
                                              prev.x[static_cast<std::size_t>(per - delay)]);
                for (std::size_t s = 0; s < rec.size(); s += 10) {
                    res.ts_t.push_back(rec.t[s]);
                    res.ts_x.push_back(rec.x[s]);
                }
                const double amp = response_amplitude(
                    fourier_coeffs(rec.x, rec.dt, rec.t0, run.omega, 1));
                int lab = -1;
                if (std::abs(amp - amp_low) <= esc.settle_rel_band * amp_low) lab = 0;
                if (std::abs(amp - amp_high) <= esc.settle_rel_band * amp_high) lab = 1;
                if (lab >= 0 && lab == band_label)
                    ++in_band;
                else
                    in_band = lab >= 0 ? 1 : 0;
                band_label = lab;
                res.periods = k + 1;
                prev = std::move(rec);
                if (in_band >= esc.settle_periods_in_band) {
                    res.label = lab;
                    break;
                }
            }
            if (res.label < 0)
                throw EscapeTimeout("escape run " + std::to_string(r) +
                                    " reached no attractor in " +
                                    std::to_string(esc.max_periods) + " periods");
        } catch (const Error& e) {
            std::lock_guard lock(mtx);
            failures.push_back(e.what());
        }
    });

    std::filesystem::create_directories(ctx.out_dir);
    std::ofstream poincare(ctx.out_dir / "escape_poincare.csv", std::ios::binary);
    poincare << "run,period,x,x_delayed\n";
    int n_low = 0, n_high = 0, n_timeout = 0;
    for (int r = 0; r < esc.runs; ++r) {
        const auto& res = results[r];
        (res.label == 0 ? n_low : res.label == 1 ? n_high : n_timeout) += 1;
        for (std::size_t k = 0; k < res.poincare.size(); ++k)
            poincare << r << ',' << (k + 1) << ',' << format_g17(res.poincare[k].first) << ','
                     << format_g17(res.poincare[k].second) << '\n';
        std::ofstream ts(ctx.out_dir / ("escape_run" + std::to_string(r) + ".csv"),
                         std::ios::binary);
        ts << "t,x\n";
        for (std::size_t s = 0; s < res.ts_t.size(); ++s)
            ts << format_g17(res.ts_t[s]) << ',' << format_g17(res.ts_x[s]) << '\n';
    }
    poincare.close();

    std::ofstream dirs(ctx.out_dir / "escape_directions.csv", std::ios::binary);
    dirs << "label,x,x_delayed\n";
    dirs << "orbit," << format_g17(orbit_pt(0)) << ',' << format_g17(orbit_pt(1)) << '\n';
    dirs << "unstable_dir," << format_g17(unstable_dir(0)) << ',' << format_g17(unstable_dir(1))
         << '\n';
    dirs << "stable_dir," << format_g17(stable_dir(0)) << ',' << format_g17(stable_dir(1))
         << '\n';
    const Eigen::Vector2d low_pt = section_point(low->response);
    const Eigen::Vector2d high_pt = section_point(high->response);
    dirs << "attractor_low," << format_g17(low_pt(0)) << ',' << format_g17(low_pt(1)) << '\n';
    dirs << "attractor_high," << format_g17(high_pt(0)) << ',' << format_g17(high_pt(1)) << '\n';
    dirs.close();

    nlohmann::json summary{{"orbit_index", orbit_index},
                           {"gamma", orbit.gamma},
                           {"runs", esc.runs},
                           {"low_attractor", n_low},
                           {"high_attractor", n_high},
                           {"timeouts", n_timeout},
                           {"amp_low", amp_low},
                           {"amp_high", amp_high},
                           {"floquet", to_json(est)}};
    write_text(summary.dump(2) + "\n", ctx.out_dir / "escape_summary.json");
    write_snapshot(ctx);
    return report_failures(failures);
}

int cmd_perturbation_study(const CommandContext& ctx,
                           const std::filesystem::path& annotated_run_json) {
    const ContinuationRun run = read_run_json(annotated_run_json);
    const auto& study = ctx.config.study;
    const auto [first, last] = unstable_segment(run);
    if (first < 0) throw ConfigError("run carries no unstable points; run `floquet` first");
    const int unstable_idx =
        study.unstable_index >= 0 ? study.unstable_index : (first + last) / 2;
    const int stable_idx = study.stable_index >= 0 ? study.stable_index : first / 2;
    if (stable_idx >= first) throw ConfigError("stable_index must precede the unstable segment");

    struct Case {
        const char* condition;
        int point;
        bool closed_loop;
    };
    const Case cases[] = {{"stable_open_loop", stable_idx, false},
                          {"stable_closed_loop", stable_idx, true},
                          {"unstable_closed_loop", unstable_idx, true}};

    struct Cell {
        bool ok = false;
        FloquetEstimate est;
    };
    const std::size_t n_amp = study.amplitudes.size();
    std::vector<Cell> cells(3 * n_amp);
    std::vector<std::string> failures;
    std::mutex mtx;

    parallel_for(cells.size(), ctx.jobs, [&](std::size_t idx) {
        const std::size_t c = idx / n_amp, a = idx % n_amp;
        try {
            SysidConfig cfg = ctx.config.sysid;
            cfg.perturbation_amplitude = study.amplitudes[a];
            cfg.repeats = study.repeats;
            cfg.ambient_amplitude = study.ambient_amplitude;
            cfg.closed_loop = cases[c].closed_loop;
            cfg.seed = split_seed(ctx.config.master_seed, kStudyStream, idx);
            cells[idx].est =
                estimate_floquet(make_rig(ctx.config), run.points[cases[c].point], cfg);
            cells[idx].ok = true;
        } catch (const Error& e) {
            std::lock_guard lock(mtx);
            failures.push_back(std::string(cases[c].condition) + " at amplitude " +
                               std::to_string(study.amplitudes[a]) + ": " + e.what());
        }
    });

    std::filesystem::create_directories(ctx.out_dir);
    std::ofstream csv(ctx.out_dir / "perturbation_study.csv", std::ios::binary);
    csv << "condition,perturbation,mean_abs_1,ci_1,mean_abs_2,ci_2,stable\n";
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t a = 0; a < n_amp; ++a) {
            const auto& cell = cells[c * n_amp + a];
            if (!cell.ok) continue;
            csv << cases[c].condition << ',' << format_g17(study.amplitudes[a]) << ','
                << format_g17(cell.est.mean_abs[0]) << ',' << format_g17(cell.est.ci_half_width[0])
                << ',' << format_g17(cell.est.mean_abs[1]) << ','
                << format_g17(cell.est.ci_half_width[1]) << ',' << (cell.est.stable ? 1 : 0)
                << '\n';
        }
    csv.close();
    write_snapshot(ctx);
    return report_failures(failures);
}

int cmd_surface(const CommandContext& ctx,
                const std::vector<std::filesystem::path>& sweep_jsons) {
    const auto runs = load_runs(sweep_jsons);
    std::vector<SurfacePoint> points;
    for (const auto& run : runs)
        for (const auto& p : run.points)
            points.push_back({p.omega, response_amplitude(p.response), p.gamma});
    if (points.size() > ctx.config.surface.max_points) {
        std::vector<SurfacePoint> thinned;
        const double stride =
            static_cast<double>(points.size()) / static_cast<double>(ctx.config.surface.max_points);
        for (std::size_t i = 0; i < ctx.config.surface.max_points; ++i)
            thinned.push_back(points[static_cast<std::size_t>(i * stride)]);
        points = std::move(thinned);
    }

    GpOptions gp_opts = ctx.config.surface.gp;
    gp_opts.seed = split_seed(ctx.config.master_seed, kSurfaceStream, 0);
    const GpSurface surface = GpSurface::fit(points, gp_opts);

    std::vector<std::string> failures;
    const auto wr = surface.omega_range();
    auto ar = surface.amplitude_range();
    const double pad = 0.05 * (ar.second - ar.first);
    ar.first = std::max(0.0, ar.first - pad);
    ar.second += pad;

    std::filesystem::create_directories(ctx.out_dir);
    try {
        FoldOptions fopts;
        fopts.omega_steps = ctx.config.surface.fold_omega_steps;
        fopts.amplitude_range = ar;
        const auto curve = fold_curve(surface, wr, fopts);
        write_fold_csv(curve, ctx.out_dir / "fold_curve.csv");
    } catch (const NoFold& e) {
        failures.push_back(std::string("fold curve: ") + e.what());
    }

    for (double gamma : ctx.config.surface.slice_gammas) {
        try {
            SliceOptions sopts;
            sopts.omega_range = wr;
            sopts.amplitude_range = ar;
            const auto branches = frequency_response(surface, gamma, sopts);
            write_slice_csv(branches, ctx.out_dir / ("slice_" + gamma_tag(gamma) + ".csv"));
        } catch (const Error& e) {
            failures.push_back("slice at gamma=" + gamma_tag(gamma) + ": " + e.what());
        }
    }

    const auto& h = surface.hyperparameters();
    nlohmann::json meta{{"n_train", points.size()},
                        {"log_marginal_likelihood", surface.log_marginal_likelihood()},
                        {"jitter", surface.jitter_used()},
                        {"hyperparameters",
                         {{"length_omega", h.length_omega},
                          {"length_amplitude", h.length_amplitude},
                          {"signal_sigma", h.signal_sigma},
                          {"noise_sigma", h.noise_sigma}}}};
    write_text(meta.dump(2) + "\n", ctx.out_dir / "surface.json");
    write_snapshot(ctx);
    return report_failures(failures);
}

}  // namespace cbc
