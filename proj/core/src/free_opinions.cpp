#include "opsheaf/free_opinions.hpp"

#include "opsheaf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace opsheaf {

namespace {

ode::Options to_ode(const FlowOptions& f)
{
    ode::Options opt;
    opt.t_end = f.t_end;
    opt.sample_interval = f.sample_interval;
    opt.rtol = f.rtol;
    opt.atol = f.atol;
    opt.convergence_tol = f.convergence_tol;
    return opt;
}

BlockLayout labelled_layout(const Sheaf& sheaf, const std::vector<Matrix>& bases)
{
    std::vector<Eigen::Index> sizes;
    sizes.reserve(bases.size());
    for (const auto& b : bases) {
        sizes.push_back(b.cols());
    }
    return BlockLayout(sheaf.graph().vertex_ids(), std::move(sizes));
}

LinearOperator block_embedding(const Sheaf& sheaf, const std::vector<Matrix>& bases)
{
    BlockLayout cols = labelled_layout(sheaf, bases);
    LinearOperator op{Matrix::Zero(sheaf.c0_dim(), cols.total()), sheaf.vertex_layout(), cols};
    for (VertexIndex v = 0; v < bases.size(); ++v) {
        op.matrix.block(sheaf.vertex_layout().offset(v), cols.offset(v), bases[v].rows(), bases[v].cols()) = bases[v];
    }
    return op;
}

} // namespace

// ---------------------------------------------------------------------------
// StubbornSpec

StubbornSpec StubbornSpec::none(const Sheaf& sheaf)
{
    StubbornSpec s;
    for (VertexIndex v = 0; v < sheaf.graph().vertex_count(); ++v) {
        s.basis.push_back(Matrix::Zero(sheaf.vertex_dim(v), 0));
        s.values.push_back(Vector::Zero(0));
    }
    return s;
}

StubbornSpec StubbornSpec::fully_stubborn(const Sheaf& sheaf, const std::vector<VertexIndex>& vertices,
                                          const Cochain0& x)
{
    check_conforms(sheaf, x);
    StubbornSpec s = none(sheaf);
    for (VertexIndex v : vertices) {
        s.basis.at(v) = Matrix::Identity(sheaf.vertex_dim(v), sheaf.vertex_dim(v));
        s.values.at(v) = sheaf.vertex_block(x.values, v);
    }
    return s;
}

std::vector<VertexIndex> StubbornSpec::stubborn_vertices() const
{
    std::vector<VertexIndex> out;
    for (VertexIndex v = 0; v < basis.size(); ++v) {
        if (is_stubborn(v)) {
            out.push_back(v);
        }
    }
    return out;
}

std::vector<VertexIndex> StubbornSpec::free_vertices() const
{
    std::vector<VertexIndex> out;
    for (VertexIndex v = 0; v < basis.size(); ++v) {
        if (!is_stubborn(v)) {
            out.push_back(v);
        }
    }
    return out;
}

Vector StubbornSpec::packed_values() const
{
    Eigen::Index n = 0;
    for (const auto& u : values) {
        n += u.size();
    }
    Vector out(n);
    Eigen::Index at = 0;
    for (const auto& u : values) {
        out.segment(at, u.size()) = u;
        at += u.size();
    }
    return out;
}

void StubbornSpec::validate(const Sheaf& sheaf, double orthonormality_tol) const
{
    const auto& g = sheaf.graph();
    if (basis.size() != g.vertex_count() || values.size() != g.vertex_count()) {
        throw ConformanceError("stubborn spec: expected one entry per vertex (" + std::to_string(g.vertex_count())
                               + ")");
    }
    for (VertexIndex v = 0; v < g.vertex_count(); ++v) {
        const Matrix& b = basis[v];
        const std::string where = "stubborn spec at vertex '" + g.vertex_id(v) + "': ";
        if (b.rows() != sheaf.vertex_dim(v)) {
            throw ConformanceError(where + "basis has " + std::to_string(b.rows()) + " rows, stalk dimension is "
                                   + std::to_string(sheaf.vertex_dim(v)));
        }
        if (b.cols() > b.rows()) {
            throw ValidationError(where + "more basis vectors than the stalk dimension");
        }
        if (values[v].size() != b.cols()) {
            throw ConformanceError(where + std::to_string(values[v].size()) + " clamped values for a "
                                   + std::to_string(b.cols()) + "-dimensional stubborn subspace");
        }
        if (!b.allFinite() || !values[v].allFinite()) {
            throw ValidationError(where + "non-finite entries");
        }
        if (b.cols() > 0) {
            const double err = (b.transpose() * b - Matrix::Identity(b.cols(), b.cols())).cwiseAbs().maxCoeff();
            if (err > orthonormality_tol) {
                throw ValidationError(where + "basis is not orthonormal (max |B^T B - I| = " + std::to_string(err)
                                      + ")");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Frames and blocks

StubbornFrame build_frame(const Sheaf& sheaf, const StubbornSpec& spec)
{
    spec.validate(sheaf);
    StubbornFrame frame;
    for (VertexIndex v = 0; v < spec.basis.size(); ++v) {
        frame.free_basis.push_back(orthogonal_complement(spec.basis[v], sheaf.vertex_dim(v)));
    }
    frame.iota_s = block_embedding(sheaf, spec.basis);
    frame.iota_q = block_embedding(sheaf, frame.free_basis);
    return frame;
}

Matrix BlockLaplacian::reassembled() const
{
    const Eigen::Index s = l_ss.rows();
    const Eigen::Index q = l_qq.rows();
    Matrix out(s + q, s + q);
    out.topLeftCorner(s, s) = l_ss.matrix;
    out.topRightCorner(s, q) = l_sq.matrix;
    out.bottomLeftCorner(q, s) = l_qs.matrix;
    out.bottomRightCorner(q, q) = l_qq.matrix;
    return out;
}

Matrix BlockLaplacian::rotated_laplacian() const
{
    Matrix r(frame.iota_s.rows(), frame.stubborn_dim() + frame.free_dim());
    r << frame.iota_s.matrix, frame.iota_q.matrix;
    return r.transpose() * ambient_laplacian * r;
}

FreeOpinionSheaf build_free_sheaf(const Sheaf& sheaf, const StubbornSpec& spec)
{
    StubbornFrame frame = build_frame(sheaf, spec);
    const auto& g = sheaf.graph();

    std::vector<Eigen::Index> vdims;
    std::vector<Eigen::Index> edims(sheaf.edge_layout().sizes().begin(), sheaf.edge_layout().sizes().end());
    for (const auto& t : frame.free_basis) {
        vdims.push_back(t.cols());
    }
    std::vector<Matrix> tails;
    std::vector<Matrix> heads;
    for (EdgeIndex e = 0; e < g.edge_count(); ++e) {
        tails.push_back(sheaf.tail_map(e) * frame.free_basis[g.edge(e).tail]);
        heads.push_back(sheaf.head_map(e) * frame.free_basis[g.edge(e).head]);
    }
    Sheaf free(g, std::move(vdims), std::move(edims), std::move(tails), std::move(heads));

    BlockLaplacian blocks;
    blocks.ambient_coboundary = coboundary_matrix(sheaf).matrix;
    blocks.ambient_laplacian = laplacian(sheaf).matrix;
    const Matrix& l = blocks.ambient_laplacian;
    const Matrix& is = frame.iota_s.matrix;
    const Matrix& iq = frame.iota_q.matrix;
    const BlockLayout& s_layout = frame.iota_s.col_blocks;
    const BlockLayout& q_layout = frame.iota_q.col_blocks;

    blocks.l_ss = {is.transpose() * l * is, s_layout, s_layout};
    blocks.l_sq = {is.transpose() * l * iq, s_layout, q_layout};
    blocks.l_qs = {iq.transpose() * l * is, q_layout, s_layout};
    // L_QQ taken from the free sheaf so it is exactly its Laplacian.
    blocks.l_qq = laplacian(free);
    blocks.l_qq.row_blocks = q_layout;
    blocks.l_qq.col_blocks = q_layout;
    blocks.frame = std::move(frame);
    return FreeOpinionSheaf{std::move(free), std::move(blocks)};
}

// ---------------------------------------------------------------------------
// Poisson equation

PoissonSolution solve_poisson(const BlockLaplacian& blocks, const Vector& u, const Vector& y0, double rcond,
                              double agreement_tol, double residual_tol)
{
    const auto& frame = blocks.frame;
    if (u.size() != frame.stubborn_dim()) {
        throw ConformanceError("poisson: clamped vector has length " + std::to_string(u.size()) + ", expected "
                               + std::to_string(frame.stubborn_dim()));
    }
    if (y0.size() != frame.free_dim()) {
        throw ConformanceError("poisson: free initial state has length " + std::to_string(y0.size())
                               + ", expected " + std::to_string(frame.free_dim()));
    }
    if (!(rcond > 0.0)) {
        throw ParameterError("poisson: cutoff must be positive");
    }

    const Matrix& lq = blocks.l_qq.matrix;
    const Matrix lq_pinv = pseudo_inverse(lq, rcond);
    const Vector forcing = blocks.l_qs.matrix * u;
    const Vector x0 = frame.total_state(u, y0);

    PoissonSolution sol;
    sol.from_full_gradient = y0 - lq_pinv * frame.free_part(blocks.ambient_laplacian * x0);
    sol.from_projection = (y0 - lq_pinv * (lq * y0)) - lq_pinv * forcing;
    sol.from_correction = y0 - lq_pinv * (lq * y0 + forcing);

    sol.formula_spread = std::max({(sol.from_full_gradient - sol.from_projection).norm(),
                                   (sol.from_full_gradient - sol.from_correction).norm(),
                                   (sol.from_projection - sol.from_correction).norm()});
    sol.y_inf = sol.from_correction;
    sol.x_inf = frame.total_state(u, sol.y_inf);
    sol.residual = (lq * sol.y_inf + forcing).norm();
    sol.residual_scale = std::max(1.0, forcing.norm());

    if (sol.residual > residual_tol * sol.residual_scale) {
        throw SolvabilityError("poisson: L_Q y = -L_QS u has no solution (residual "
                               + std::to_string(sol.residual) + " exceeds " + std::to_string(residual_tol)
                               + " * " + std::to_string(sol.residual_scale) + ")");
    }
    const double scale = std::max({1.0, y0.norm(), u.norm()});
    if (sol.formula_spread > agreement_tol * scale) {
        throw NumericalError("poisson: closed forms disagree by " + std::to_string(sol.formula_spread));
    }
    return sol;
}

ConstrainedTrajectory constrained_diffuse(const BlockLaplacian& blocks, const Vector& u, const Vector& y0,
                                          double alpha, const FlowOptions& options)
{
    const auto& frame = blocks.frame;
    if (u.size() != frame.stubborn_dim() || y0.size() != frame.free_dim()) {
        throw ConformanceError("constrained diffusion: state does not match the stubborn/free split ("
                               + std::to_string(frame.stubborn_dim()) + " + " + std::to_string(frame.free_dim())
                               + ")");
    }
    if (!(alpha > 0.0)) {
        throw ParameterError("constrained diffusion: alpha must be positive");
    }
    const Matrix& lq = blocks.l_qq.matrix;
    const Vector forcing = blocks.l_qs.matrix * u;
    auto rhs = [&](double, const Vector& y, Vector& dy) { dy.noalias() = -alpha * (lq * y + forcing); };
    ode::Solution sol = ode::integrate(rhs, y0, to_ode(options));

    ConstrainedTrajectory out;
    out.free.times = std::move(sol.times);
    out.free.states = std::move(sol.states);
    out.free.status = sol.status;
    out.free.final_velocity_norm = sol.final_velocity_norm;
    out.free.accepted_steps = sol.accepted_steps;
    out.free.rejected_steps = sol.rejected_steps;
    out.free.message = sol.message;
    out.total.reserve(out.free.states.size());
    out.free.energy.reserve(out.free.states.size());
    for (const auto& y : out.free.states) {
        out.total.push_back(frame.total_state(u, y));
        out.free.energy.push_back(0.5 * (blocks.ambient_coboundary * out.total.back()).squaredNorm());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cohomological checks

CompatibilityResult compatibility_obstruction(const Sheaf& sheaf, const StubbornSpec& spec,
                                              std::optional<double> tol)
{
    const StubbornFrame frame = build_frame(sheaf, spec);
    const Matrix d = coboundary_matrix(sheaf).matrix;
    const Matrix dq = d * frame.iota_q.matrix;
    const Vector r = d * (frame.iota_s.matrix * spec.packed_values());

    CompatibilityResult out;
    out.obstruction = r - dq * pinv_apply(dq, r);
    out.obstruction_residual = out.obstruction.norm();
    // Round-off floor: r can itself be pure round-off when u comes from a section.
    const double floor = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max<Eigen::Index>(1, d.rows()))
                         * d.norm() * spec.packed_values().norm();
    out.tolerance = tol.value_or(std::max(1e-8 * r.norm(), floor));
    out.compatible = out.obstruction_residual <= out.tolerance;
    return out;
}

namespace {

// Rank against a fixed scale, so a composite that vanishes up to round-off
// is not promoted to full rank by a relative cutoff.
Eigen::Index rank_at_scale(const Matrix& m, double scale, double rcond)
{
    if (m.size() == 0) {
        return 0;
    }
    const Vector sv = Eigen::JacobiSVD<Matrix>(m).singularValues();
    const double cutoff = rcond * static_cast<double>(std::max(m.rows(), m.cols())) * std::max(1.0, scale);
    return static_cast<Eigen::Index>((sv.array() > cutoff).count());
}

} // namespace

ExactSequenceReport exact_sequence_audit(const Sheaf& sheaf, const StubbornSpec& spec, double rcond)
{
    const StubbornFrame frame = build_frame(sheaf, spec);
    const Matrix d = coboundary_matrix(sheaf).matrix;
    const Matrix dq = d * frame.iota_q.matrix;
    const Matrix& is = frame.iota_s.matrix;
    const Matrix& iq = frame.iota_q.matrix;

    const Matrix h0_full = null_space(d.rows() > 0 ? d : Matrix::Zero(1, d.cols()), rcond);
    const Matrix h0_free = null_space(dq.rows() > 0 ? dq : Matrix::Zero(1, dq.cols()), rcond);
    const auto rank_d = static_cast<Eigen::Index>(numerical_rank(d, rcond));
    const auto rank_dq = static_cast<Eigen::Index>(numerical_rank(dq, rcond));

    ExactSequenceReport rep;
    rep.h0_free = h0_free.cols();
    rep.h0_full = h0_full.cols();
    rep.c0_stubborn = frame.stubborn_dim();
    rep.h1_free = d.rows() - rank_dq;
    rep.h1_full = d.rows() - rank_d;

    // H0(Q) -> H0(F) is x |-> iota_Q x.
    const Matrix included = iq * h0_free;
    rep.injective_at_h0 = rank_at_scale(included, 1.0, rcond) == rep.h0_free;

    // H0(F) -> C0(S) is P_S; its kernel must be the image of H0(Q).
    const Matrix restricted = is.transpose() * h0_full;
    rep.restriction_rank = rank_at_scale(restricted, 1.0, rcond);
    rep.exact_at_h0_full = rep.h0_full - rep.restriction_rank == rep.h0_free;

    // Connecting map C0(S) -> H1(Q) = C1 / im dQ, represented in im(dQ)^perp.
    const Matrix connecting = d * is - dq * (pseudo_inverse(dq, rcond) * (d * is));
    rep.connecting_rank = rank_at_scale(connecting, d.size() ? d.norm() : 0.0, rcond);
    rep.exact_at_c0 = rep.restriction_rank == rep.c0_stubborn - rep.connecting_rank;

    // H1(Q) -> H1(F) is surjective since im dQ lies in im dF; exactness in the middle.
    rep.exact_at_h1_free = rep.h1_free - rep.h1_full == rep.connecting_rank;
    return rep;
}

} // namespace opsheaf
