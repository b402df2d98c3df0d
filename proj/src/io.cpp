#include "cbc/io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cbc {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);  // binary: identical bytes on every platform
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

nlohmann::json to_json(const FourierSeries& series) {
    nlohmann::json harmonics = nlohmann::json::array();
    for (const auto& [a, b] : series.harmonics) harmonics.push_back({a, b});
    return {{"omega", series.omega}, {"a0", series.a0}, {"harmonics", harmonics}};
}

FourierSeries fourier_from_json(const nlohmann::json& j) {
    FourierSeries s;
    s.omega = j.at("omega").get<double>();
    s.a0 = j.at("a0").get<double>();
    for (const auto& h : j.at("harmonics"))
        s.harmonics.emplace_back(h.at(0).get<double>(), h.at(1).get<double>());
    return s;
}

void write_record_csv(const SampledRecord& record, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "t,x,xdot,u,i,eta\n";
    for (std::size_t k = 0; k < record.size(); ++k) {
        out << format_g17(record.t[k]) << ',' << format_g17(record.x[k]) << ','
            << format_g17(record.xdot[k]) << ',' << format_g17(record.u[k]) << ','
            << format_g17(record.i[k]) << ',' << format_g17(record.eta[k]) << '\n';
    }
}

void write_run_csv(const ContinuationRun& run, const std::filesystem::path& path) {
    auto out = open_out(path);
    bool any_flag = false;
    for (const auto& p : run.points) any_flag = any_flag || p.stable.has_value();
    out << (any_flag ? "omega,gamma,response_amplitude,residual,stability_flag\n"
                     : "omega,gamma,response_amplitude,residual\n");
    for (const auto& p : run.points) {
        out << format_g17(p.omega) << ',' << format_g17(p.gamma) << ','
            << format_g17(response_amplitude(p.response)) << ',' << format_g17(p.residual);
        if (any_flag) out << ',' << (p.stable.has_value() ? (*p.stable ? "1" : "0") : "");
        out << '\n';
    }
}

nlohmann::json to_json(const ContinuationRun& run) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : run.points) {
        nlohmann::json jp{{"omega", p.omega},
                          {"gamma", p.gamma},
                          {"phase", p.phase},
                          {"target_amplitude", p.target_amplitude},
                          {"residual", p.residual},
                          {"response", to_json(p.response)},
                          {"control", to_json(p.control)},
                          {"target", to_json(p.target.series)},
                          {"state", {{"x", p.state.x}, {"xdot", p.state.xdot}, {"t", p.state.t}}}};
        if (p.stable) jp["stable"] = *p.stable;
        points.push_back(std::move(jp));
    }
    nlohmann::json j{{"omega", run.omega},
                     {"amplitude_grid", run.amplitude_grid},
                     {"tol_rel", run.tol_rel},
                     {"seed", run.seed},
                     {"points", std::move(points)}};
    if (!run.aborted_reason.empty()) j["aborted_reason"] = run.aborted_reason;
    return j;
}

ContinuationRun run_from_json(const nlohmann::json& j) {
    ContinuationRun run;
    run.omega = j.at("omega").get<double>();
    run.amplitude_grid = j.at("amplitude_grid").get<std::vector<double>>();
    run.tol_rel = j.value("tol_rel", 0.0);
    run.seed = j.value("seed", std::uint64_t{0});
    run.aborted_reason = j.value("aborted_reason", std::string{});
    for (const auto& jp : j.at("points")) {
        ContinuationPoint p;
        p.omega = jp.at("omega").get<double>();
        p.gamma = jp.at("gamma").get<double>();
        p.phase = jp.at("phase").get<double>();
        p.target_amplitude = jp.value("target_amplitude", 0.0);
        p.residual = jp.at("residual").get<double>();
        p.response = fourier_from_json(jp.at("response"));
        p.control = fourier_from_json(jp.at("control"));
        p.target.series = fourier_from_json(jp.at("target"));
        p.state.x = jp.at("state").at("x").get<double>();
        p.state.xdot = jp.at("state").at("xdot").get<double>();
        p.state.t = jp.at("state").at("t").get<double>();
        if (jp.contains("stable")) p.stable = jp.at("stable").get<bool>();
        run.points.push_back(std::move(p));
    }
    return run;
}

void write_run_json(const ContinuationRun& run, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << to_json(run).dump(2) << '\n';
}

ContinuationRun read_run_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return run_from_json(j);
}

namespace {

nlohmann::json multipliers_json(const std::vector<std::complex<double>>& mu) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : mu) arr.push_back({{"re", m.real()}, {"im", m.imag()}});
    return arr;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

nlohmann::json to_json(const FloquetResult& result) {
    return {{"multipliers", multipliers_json(result.multipliers)},
            {"monodromy", matrix_json(result.monodromy)},
            {"m", result.m_samples},
            {"n", result.n_order},
            {"rss", result.rss},
            {"stable", result.stable},
            {"condition_b0", result.condition_b0}};
}

nlohmann::json to_json(const FloquetEstimate& estimate) {
    nlohmann::json j = to_json(estimate.result());
    j["ci"] = {{"mean_abs", {estimate.mean_abs[0], estimate.mean_abs[1]}},
               {"half_width", {estimate.ci_half_width[0], estimate.ci_half_width[1]}},
               {"repeats", estimate.repeats.size()}};
    j["stable"] = estimate.stable;
    return j;
}

nlohmann::json oracle_to_json(const VariationalResult& result) {
    std::vector<std::complex<double>> mu(result.multipliers.begin(), result.multipliers.end());
    Eigen::MatrixXd m = result.monodromy;
    return {{"multipliers", multipliers_json(mu)},
            {"monodromy", matrix_json(m)},
            {"m", 2},
            {"n", 2},
            {"rss", 0.0},
            {"stable", std::abs(mu[0]) <= 1.0},
            {"return_residual", result.return_residual},
            {"source", "oracle"}};
}

void write_fold_csv(const std::vector<FoldPoint>& curve, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "omega,A,gamma\n";
    for (const auto& p : curve)
        out << format_g17(p.omega) << ',' << format_g17(p.amplitude) << ','
            << format_g17(p.gamma) << '\n';
}

void write_slice_csv(const std::vector<SliceBranch>& branches,
                     const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "omega,A,branch_id,is_fold_point\n";
    for (std::size_t b = 0; b < branches.size(); ++b) {
        const auto& br = branches[b];
        for (std::size_t i = 0; i < br.omega.size(); ++i)
            out << format_g17(br.omega[i]) << ',' << format_g17(br.amplitude[i]) << ',' << b
                << ',' << (br.is_fold[i] ? 1 : 0) << '\n';
    }
}

void write_text(const std::string& text, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << text;
}

}  // namespace cbc
