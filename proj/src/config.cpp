#include "cbc/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cbc/errors.hpp"
#include "cbc/io.hpp"

namespace cbc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_list(text)) out.push_back(static_cast<int>(std::llround(v)));
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_g17(v[i]);
    return s;
}

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

bool parse_bool(const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("cannot parse boolean value '" + text + "'");
}

}  // namespace

std::vector<double> ExperimentConfig::sweep_frequencies_hz() const {
    std::vector<double> out;
    const int steps =
        static_cast<int>(std::round((sweep.freq_max_hz - sweep.freq_min_hz) / sweep.freq_step_hz));
    for (int i = 0; i <= steps; ++i) out.push_back(sweep.freq_min_hz + i * sweep.freq_step_hz);
    return out;
}

std::vector<double> ExperimentConfig::amplitude_grid() const {
    std::vector<double> out;
    const int steps = static_cast<int>(
        std::round((sweep.amplitude_max - sweep.amplitude_min) / sweep.amplitude_step));
    for (int i = 0; i <= steps; ++i) out.push_back(sweep.amplitude_min + i * sweep.amplitude_step);
    return out;
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig load_config(const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }

    ExperimentConfig cfg;
    SpringGeometry geometry{128.0, 0.12, 0.10};
    bool use_geometry = false;
    bool sysid_perturbation_set = false, escape_noise_set = false;

    try {
        for (const auto& [section, keys] : tree) {
            for (const auto& [key, value] : keys) {
                const std::string v = value.get_value<std::string>();
                const std::string full = section + "." + key;
                if (full == "rig.natural_frequency_hz") cfg.rig.natural_frequency = kTwoPi * std::stod(v);
                else if (full == "rig.damping_ratio") cfg.rig.damping_ratio = std::stod(v);
                else if (full == "rig.cubic_stiffness") cfg.rig.cubic_stiffness = std::stod(v);
                else if (full == "rig.displacement_limit") cfg.rig.displacement_limit = std::stod(v);
                else if (full == "rig.sample_rate") cfg.rig.sample_rate = std::stod(v);
                else if (full == "rig.use_spring_geometry") use_geometry = parse_bool(v);
                else if (full == "rig.spring_constant") geometry.spring_constant = std::stod(v);
                else if (full == "rig.rest_length") geometry.rest_length = std::stod(v);
                else if (full == "rig.mount_length") geometry.mount_length = std::stod(v);
                else if (full == "controller.kp") cfg.controller.kp = std::stod(v);
                else if (full == "controller.kd") cfg.controller.kd = std::stod(v);
                else if (full == "controller.enabled") cfg.controller.enabled = parse_bool(v);
                else if (full == "noise.amplitude") cfg.noise.amplitude = std::stod(v);
                else if (full == "noise.cutoff_hz") cfg.noise.cutoff_hz = std::stod(v);
                else if (full == "noise.filter_order") cfg.noise.filter_order = std::stoi(v);
                else if (full == "sweep.freq_min_hz") cfg.sweep.freq_min_hz = std::stod(v);
                else if (full == "sweep.freq_max_hz") cfg.sweep.freq_max_hz = std::stod(v);
                else if (full == "sweep.freq_step_hz") cfg.sweep.freq_step_hz = std::stod(v);
                else if (full == "sweep.amplitude_min") cfg.sweep.amplitude_min = std::stod(v);
                else if (full == "sweep.amplitude_max") cfg.sweep.amplitude_max = std::stod(v);
                else if (full == "sweep.amplitude_step") cfg.sweep.amplitude_step = std::stod(v);
                else if (full == "sweep.n_harmonics") cfg.sweep.engine.n_harmonics = std::stoul(v);
                else if (full == "sweep.settle_periods") cfg.sweep.engine.settle_periods = std::stoi(v);
                else if (full == "sweep.measure_periods") cfg.sweep.engine.measure_periods = std::stoi(v);
                else if (full == "sweep.tol_rel") cfg.sweep.engine.tol_rel = std::stod(v);
                else if (full == "sweep.settle_tol_rel") cfg.sweep.engine.settle_tol_rel = std::stod(v);
                else if (full == "sweep.max_iter") cfg.sweep.engine.max_iter = std::stoi(v);
                else if (full == "sysid.m") cfg.sysid.m_samples = std::stoi(v);
                else if (full == "sysid.n") cfg.sysid.n_order = std::stoi(v);
                else if (full == "sysid.auto_order") cfg.sysid.auto_order = parse_bool(v);
                else if (full == "sysid.m_candidates") cfg.sysid.m_candidates = parse_int_list(v);
                else if (full == "sysid.n_candidates") cfg.sysid.n_candidates = parse_int_list(v);
                else if (full == "sysid.perturbation_amplitude") {
                    cfg.sysid.perturbation_amplitude = std::stod(v);
                    sysid_perturbation_set = true;
                }
                else if (full == "sysid.n_periods") cfg.sysid.n_periods = std::stoi(v);
                else if (full == "sysid.discard_periods") cfg.sysid.discard_periods = std::stoi(v);
                else if (full == "sysid.settle_periods") cfg.sysid.settle_periods = std::stoi(v);
                else if (full == "sysid.repeats") cfg.sysid.repeats = std::stoi(v);
                else if (full == "sysid.ambient_amplitude") cfg.sysid.ambient_amplitude = std::stod(v);
                else if (full == "sysid.ridge") cfg.sysid.arx.ridge = parse_bool(v);
                else if (full == "floquet.freq_hz") cfg.floquet.freq_hz = std::stod(v);
                else if (full == "floquet.branch_repeats") cfg.floquet.branch_repeats = std::stoi(v);
                else if (full == "escape.runs") cfg.escape.runs = std::stoi(v);
                else if (full == "escape.max_periods") cfg.escape.max_periods = std::stoi(v);
                else if (full == "escape.noise_amplitude") {
                    cfg.escape.noise_amplitude = std::stod(v);
                    escape_noise_set = true;
                }
                else if (full == "escape.settle_rel_band") cfg.escape.settle_rel_band = std::stod(v);
                else if (full == "escape.settle_periods_in_band") cfg.escape.settle_periods_in_band = std::stoi(v);
                else if (full == "escape.orbit_index") cfg.escape.orbit_index = std::stoi(v);
                else if (full == "escape.delay_fraction") cfg.escape.delay_fraction = std::stod(v);
                else if (full == "perturbation_study.amplitudes") cfg.study.amplitudes = parse_list(v);
                else if (full == "perturbation_study.repeats") cfg.study.repeats = std::stoi(v);
                else if (full == "perturbation_study.ambient_amplitude") cfg.study.ambient_amplitude = std::stod(v);
                else if (full == "perturbation_study.stable_index") cfg.study.stable_index = std::stoi(v);
                else if (full == "perturbation_study.unstable_index") cfg.study.unstable_index = std::stoi(v);
                else if (full == "surface.starts") cfg.surface.gp.starts = std::stoi(v);
                else if (full == "surface.max_points") cfg.surface.max_points = std::stoul(v);
                else if (full == "surface.slice_gammas") cfg.surface.slice_gammas = parse_list(v);
                else if (full == "surface.fold_omega_steps") cfg.surface.fold_omega_steps = std::stoi(v);
                else if (full == "run.master_seed") cfg.master_seed = std::stoull(v);
                else if (full == "run.output_dir") cfg.output_dir = v;
                else throw ConfigError("unknown config key '" + full + "'");
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("malformed config value: ") + e.what());
    }

    if (use_geometry) cfg.rig.spring_geometry = geometry;
    // The [noise] section provides the perturbation defaults.
    if (!sysid_perturbation_set) cfg.sysid.perturbation_amplitude = cfg.noise.amplitude;
    if (!escape_noise_set) cfg.escape.noise_amplitude = cfg.noise.amplitude;
    cfg.sysid.noise_cutoff_hz = cfg.noise.cutoff_hz;
    cfg.sysid.ambient_cutoff_hz = cfg.noise.cutoff_hz;
    cfg.sysid.noise_filter_order = cfg.noise.filter_order;

    try {
        cfg.rig.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid rig parameters: ") + e.what());
    }
    return cfg;
}

std::string config_snapshot(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "[rig]\n";
    out << "natural_frequency_hz = " << format_g17(c.rig.natural_frequency / kTwoPi) << "\n";
    out << "damping_ratio = " << format_g17(c.rig.damping_ratio) << "\n";
    out << "cubic_stiffness = " << format_g17(c.rig.cubic_stiffness) << "\n";
    out << "displacement_limit = " << format_g17(c.rig.displacement_limit) << "\n";
    out << "sample_rate = " << format_g17(c.rig.sample_rate) << "\n";
    out << "use_spring_geometry = " << (c.rig.spring_geometry ? "true" : "false") << "\n";
    if (c.rig.spring_geometry) {
        out << "spring_constant = " << format_g17(c.rig.spring_geometry->spring_constant) << "\n";
        out << "rest_length = " << format_g17(c.rig.spring_geometry->rest_length) << "\n";
        out << "mount_length = " << format_g17(c.rig.spring_geometry->mount_length) << "\n";
    }
    out << "\n[controller]\n";
    out << "kp = " << format_g17(c.controller.kp) << "\n";
    out << "kd = " << format_g17(c.controller.kd) << "\n";
    out << "enabled = " << (c.controller.enabled ? "true" : "false") << "\n";
    out << "\n[noise]\n";
    out << "amplitude = " << format_g17(c.noise.amplitude) << "\n";
    out << "cutoff_hz = " << format_g17(c.noise.cutoff_hz) << "\n";
    out << "filter_order = " << c.noise.filter_order << "\n";
    out << "\n[sweep]\n";
    out << "freq_min_hz = " << format_g17(c.sweep.freq_min_hz) << "\n";
    out << "freq_max_hz = " << format_g17(c.sweep.freq_max_hz) << "\n";
    out << "freq_step_hz = " << format_g17(c.sweep.freq_step_hz) << "\n";
    out << "amplitude_min = " << format_g17(c.sweep.amplitude_min) << "\n";
    out << "amplitude_max = " << format_g17(c.sweep.amplitude_max) << "\n";
    out << "amplitude_step = " << format_g17(c.sweep.amplitude_step) << "\n";
    out << "n_harmonics = " << c.sweep.engine.n_harmonics << "\n";
    out << "settle_periods = " << c.sweep.engine.settle_periods << "\n";
    out << "measure_periods = " << c.sweep.engine.measure_periods << "\n";
    out << "tol_rel = " << format_g17(c.sweep.engine.tol_rel) << "\n";
    out << "settle_tol_rel = " << format_g17(c.sweep.engine.settle_tol_rel) << "\n";
    out << "max_iter = " << c.sweep.engine.max_iter << "\n";
    out << "\n[sysid]\n";
    out << "m = " << c.sysid.m_samples << "\n";
    out << "n = " << c.sysid.n_order << "\n";
    out << "auto_order = " << (c.sysid.auto_order ? "true" : "false") << "\n";
    out << "m_candidates = " << join(c.sysid.m_candidates) << "\n";
    out << "n_candidates = " << join(c.sysid.n_candidates) << "\n";
    out << "perturbation_amplitude = " << format_g17(c.sysid.perturbation_amplitude) << "\n";
    out << "n_periods = " << c.sysid.n_periods << "\n";
    out << "discard_periods = " << c.sysid.discard_periods << "\n";
    out << "settle_periods = " << c.sysid.settle_periods << "\n";
    out << "repeats = " << c.sysid.repeats << "\n";
    out << "ambient_amplitude = " << format_g17(c.sysid.ambient_amplitude) << "\n";
    out << "ridge = " << (c.sysid.arx.ridge ? "true" : "false") << "\n";
    out << "\n[floquet]\n";
    out << "freq_hz = " << format_g17(c.floquet.freq_hz) << "\n";
    out << "branch_repeats = " << c.floquet.branch_repeats << "\n";
    out << "\n[escape]\n";
    out << "runs = " << c.escape.runs << "\n";
    out << "max_periods = " << c.escape.max_periods << "\n";
    out << "noise_amplitude = " << format_g17(c.escape.noise_amplitude) << "\n";
    out << "settle_rel_band = " << format_g17(c.escape.settle_rel_band) << "\n";
    out << "settle_periods_in_band = " << c.escape.settle_periods_in_band << "\n";
    out << "orbit_index = " << c.escape.orbit_index << "\n";
    out << "delay_fraction = " << format_g17(c.escape.delay_fraction) << "\n";
    out << "\n[perturbation_study]\n";
    out << "amplitudes = " << join(c.study.amplitudes) << "\n";
    out << "repeats = " << c.study.repeats << "\n";
    out << "ambient_amplitude = " << format_g17(c.study.ambient_amplitude) << "\n";
    out << "stable_index = " << c.study.stable_index << "\n";
    out << "unstable_index = " << c.study.unstable_index << "\n";
    out << "\n[surface]\n";
    out << "starts = " << c.surface.gp.starts << "\n";
    out << "max_points = " << c.surface.max_points << "\n";
    out << "slice_gammas = " << join(c.surface.slice_gammas) << "\n";
    out << "fold_omega_steps = " << c.surface.fold_omega_steps << "\n";
    out << "\n[run]\n";
    out << "master_seed = " << c.master_seed << "\n";
    out << "output_dir = " << c.output_dir << "\n";
    return out.str();
}

std::string reference_config_text() {
    return R"(; Reference configuration. Every key is optional; the values shown are the
; defaults. Units are SI unless the key name says otherwise; the plant is
; mass-normalised, so input amplitudes carry units of m/s^2.

[rig]
natural_frequency_hz = 2.55   ; undamped natural frequency of the plant
damping_ratio = 0.03
cubic_stiffness = 50000       ; hardening Duffing coefficient [1/(m^2 s^2)]
displacement_limit = 0.08     ; simulation aborts when |x| exceeds this [m]
sample_rate = 1000            ; controller/measurement rate [Hz]
use_spring_geometry = false   ; switch to the perpendicular-spring restoring force
spring_constant = 128         ; [N/m per kg] only used with spring geometry
rest_length = 0.12            ; [m]
mount_length = 0.1            ; [m]

[controller]
kp = 500                      ; proportional gain [1/s^2]
kd = 40                       ; derivative gain [1/s]
enabled = true

[noise]
; Filtered-Gaussian perturbation source (shared defaults for sysid and escape).
amplitude = 0.5               ; std of the unfiltered stream [m/s^2]
cutoff_hz = 10                ; Butterworth cutoff; keep below the ARX Nyquist m/(2T)
filter_order = 6

[sweep]
freq_min_hz = 2.2
freq_max_hz = 3.2
freq_step_hz = 0.025
amplitude_min = 0.004         ; fundamental target amplitude grid [m]
amplitude_max = 0.064
amplitude_step = 0.002
n_harmonics = 7               ; Fourier truncation of targets and measurements
settle_periods = 10
measure_periods = 10          ; averaging window for coefficient estimation
tol_rel = 1e-6                ; non-invasiveness residual, relative to the target amplitude
settle_tol_rel = 1e-6         ; per-period drift accepted as settled
max_iter = 12                 ; fixed-point iterations before giving up

[sysid]
m = 10                        ; ARX phase count per period
n = 4                         ; ARX order (n < m)
auto_order = false            ; select (m, n) by AIC instead
m_candidates = 10
n_candidates = 1,2,3,4,5,6
perturbation_amplitude = 0.5  ; defaults to [noise] amplitude
n_periods = 200               ; perturbed periods collected per repeat
discard_periods = 5           ; dropped after the noise switches on
settle_periods = 10           ; noise-free re-settling onto the orbit
repeats = 10                  ; independent repeats behind each estimate
ambient_amplitude = 0         ; unmeasured disturbance floor [m/s^2]
ridge = false                 ; ridge fallback for rank-deficient rows

[floquet]
freq_hz = 2.9                 ; branch to annotate with stability flags
branch_repeats = 1            ; 3 reproduces the repeatability check

[escape]
runs = 40
max_periods = 600
noise_amplitude = 0.5         ; defaults to [noise] amplitude
settle_rel_band = 0.02        ; relative band around an attractor amplitude
settle_periods_in_band = 5
orbit_index = -1              ; -1: middle of the unstable segment
delay_fraction = 0.2          ; tau = delay_fraction * T for the Poincare embedding

[perturbation_study]
amplitudes = 0.05,0.1,0.2,0.5,1
repeats = 10
ambient_amplitude = 0.02      ; fixed floor the swept perturbation competes with
stable_index = -1             ; -1: middle of the lower stable segment
unstable_index = -1           ; -1: middle of the unstable segment

[surface]
starts = 8                    ; multi-start count for the marginal likelihood
max_points = 600              ; deterministic training-set cap
slice_gammas = 1.9,2,2.5,3,3.5
fold_omega_steps = 161

[run]
master_seed = 1
output_dir = out
)";
}

}  // namespace cbc
