// File formats: CSV channels at 17 significant digits and JSON sidecars for
// Fourier data, continuation runs and Floquet results.
#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "cbc/engine.hpp"
#include "cbc/oracle.hpp"
#include "cbc/rig.hpp"
#include "cbc/surface.hpp"
#include "cbc/sysid.hpp"

namespace cbc {

// %.17g formatting; enough digits to round-trip a double exactly.
std::string format_g17(double v);

nlohmann::json to_json(const FourierSeries& series);
FourierSeries fourier_from_json(const nlohmann::json& j);

// `t,x,xdot,u,i,eta` in SI units, one row per sample.
void write_record_csv(const SampledRecord& record, const std::filesystem::path& path);

// `omega,gamma,response_amplitude,residual[,stability_flag]`; the stability
// column appears once any point carries a flag.
void write_run_csv(const ContinuationRun& run, const std::filesystem::path& path);

nlohmann::json to_json(const ContinuationRun& run);
ContinuationRun run_from_json(const nlohmann::json& j);
void write_run_json(const ContinuationRun& run, const std::filesystem::path& path);
ContinuationRun read_run_json(const std::filesystem::path& path);

nlohmann::json to_json(const FloquetResult& result);
nlohmann::json to_json(const FloquetEstimate& estimate);
// Same schema as the sysid result, flagged "source": "oracle".
nlohmann::json oracle_to_json(const VariationalResult& result);

// `omega,A,gamma` polyline through the cusp.
void write_fold_csv(const std::vector<FoldPoint>& curve, const std::filesystem::path& path);
// `omega,A,branch_id,is_fold_point`.
void write_slice_csv(const std::vector<SliceBranch>& branches,
                     const std::filesystem::path& path);

void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace cbc
