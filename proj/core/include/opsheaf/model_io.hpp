#pragma once

#include "opsheaf/free_opinions.hpp"
#include "opsheaf/joint_dynamics.hpp"
#include "opsheaf/sheaf.hpp"
#include "opsheaf/structure_learning.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace opsheaf {

/// Optional rate parameters carried by a model file; command-line flags override them.
struct ModelParameters {
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<double> lambda;
    std::optional<double> mu;
};

/// Everything a model document can describe.
struct Model {
    Sheaf sheaf;
    std::optional<Cochain0> opinion;
    std::optional<StubbornSpec> stubborn;
    /// Adaptation as written; `adaptation_frozen` records that the file listed frozen incidences.
    std::optional<AdaptationSpec> adaptation;
    bool adaptation_frozen = false;
    std::optional<ScenarioPolicy> policy;
    ModelParameters parameters;

    [[nodiscard]] StubbornSpec stubborn_or_none() const;
    /// Adaptation after applying the policy table (base: the adaptation section, else nothing adapts).
    [[nodiscard]] AdaptationSpec effective_adaptation() const;
    /// Opinion section; ValidationError naming `what` when absent.
    [[nodiscard]] const Cochain0& require_opinion(std::string_view what) const;
};

inline constexpr std::string_view kModelFormat = "opsheaf-model";
inline constexpr int kModelVersion = 1;

/// Parses a model document. SchemaError messages start with a JSON path such
/// as `$.edges[2].tail`; shape mismatches raise ConformanceError with a path.
Model parse_model(std::string_view text);
Model load_model(const std::filesystem::path& path);

/// Canonical serialization: fixed key order, two-space indent, shortest
/// round-trip decimals, trailing newline.
std::string serialize_model(const Model& model);
void save_model(const std::filesystem::path& path, const Model& model);

/// Shortest decimal that parses back to the same binary64 value.
std::string format_double(double v);

// ---------------------------------------------------------------------------
// Trajectory CSV

/// Header comments `# key=value` followed by columns
/// t, energy, s0..s{n-1}.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, std::string_view kind);

/// Columns: t, psi, frobenius, norm_<vertex>..., Q_<vertex>_<i>_<j>... for
/// audited vertices, then the packed state y0.., m0.. so the run can be
/// reloaded for analysis.
void write_joint_csv(std::ostream& out, const JointTrajectory& traj, const std::vector<VertexIndex>& audited = {});

struct JointCsv {
    std::vector<double> times;
    std::vector<Vector> states;
    std::optional<double> alpha;
    std::optional<double> beta;
};

/// Reads the packed-state columns back. state_dim must match the system.
JointCsv read_joint_csv(std::istream& in, Eigen::Index state_dim);

/// Rebuilds a trajectory over `system` from recorded samples (monitors recomputed).
JointTrajectory trajectory_from_samples(const JointSystem& system, const JointCsv& csv, double alpha, double beta);

} // namespace opsheaf
