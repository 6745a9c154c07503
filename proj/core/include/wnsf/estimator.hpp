#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "wnsf/arx.hpp"
#include "wnsf/lti.hpp"

namespace wnsf {

/// Orders of the parametric model. m_c = m_d = 0 selects the semi-parametric
/// estimator (no parametric noise model).
struct ModelStructure {
    int mf = 0;  // denominator F
    int ml = 1;  // numerator L (first lag q^-1)
    int mc = 0;  // noise numerator C
    int md = 0;  // noise denominator D

    bool semi_parametric() const noexcept { return mc == 0 && md == 0; }
    int dynamic_size() const noexcept { return mf + ml; }
    int noise_size() const noexcept { return mc + md; }
    int size() const noexcept { return dynamic_size() + noise_size(); }
    /// Throws ShapeError on negative orders or ml < 1.
    void validate() const;
    int max_order() const noexcept;
};

/// Parameter vector theta = (f, l) and, for the fully parametric model, zeta = (c, d).
struct ThetaParams {
    Eigen::VectorXd f;
    Eigen::VectorXd l;
    Eigen::VectorXd c;
    Eigen::VectorXd d;

    /// (f, l, c, d) stacked.
    Eigen::VectorXd stacked() const;
    Eigen::VectorXd dynamic() const;
    static ThetaParams from_stacked(const Eigen::VectorXd& v, const ModelStructure& ms);
    ModelStructure structure() const;

    /// G = L/F with L = l_1 q^-1 + ..., F = 1 + f_1 q^-1 + ...
    TransferFunction dynamic_model() const;
    /// H = C/D (monic); identity when no noise parameters are present.
    TransferFunction noise_model() const;

    Polynomial L() const;
    Polynomial F() const;
    Polynomial C() const;
    Polynomial D() const;
};

enum class Stage { step2, step3, iterated };

struct WnsfResult {
    ThetaParams theta;
    Stage stage = Stage::step2;
    int iterations = 0;
    double weighting_condition = 1.0;
    bool converged = false;
    std::string diagnostic;
};

std::string to_string(Stage stage);

/// Lower-triangular Toeplitz matrix with first column (x_0, ..., x_{rows-1})
/// (zero-padded) and zeros above the diagonal. Requires cols <= rows.
Eigen::MatrixXd toeplitz_from_series(std::span<const double> x, Eigen::Index rows, Eigen::Index cols);

/// Coefficient sequences of A(q, eta) = (1, a_1, ..., a_n) and
/// B(q, eta) = (0, b_1, ..., b_n).
std::vector<double> a_sequence(const ArxEstimate& eta);
std::vector<double> b_sequence(const ArxEstimate& eta);

/// Q_n(eta) = [-T_{n,mf}(B) | T_{n,ml}(A)], so that b = Q theta at the truth.
Eigen::MatrixXd build_Q(const ArxEstimate& eta, const ModelStructure& ms);

/// T_n(theta) = [-T_{n,n}(L) | T_{n,n}(F)], the map from ARX errors to
/// null-space residuals.
Eigen::MatrixXd build_T(const ThetaParams& theta, Eigen::Index n);

/// Stacked fully parametric matrices. Rows: (noise block, dynamic block);
/// columns of Q: (f, l, c, d); columns of T: (a-block, b-block).
Eigen::MatrixXd build_Q_full(const ArxEstimate& eta, const ModelStructure& ms);
Eigen::MatrixXd build_T_full(const ThetaParams& theta, Eigen::Index n);

/// Step 2: unweighted least squares on b = Q theta.
WnsfResult step2_ls(const ArxEstimate& eta, const ModelStructure& ms);

/// W = (T R^-1 T')^-1 as an explicit symmetric matrix. The estimator itself
/// only uses its Cholesky factor.
Eigen::MatrixXd build_weighting(const ThetaParams& theta, const Eigen::MatrixXd& R);

struct Step3Options {
    /// Replace W by the identity (reduces Step 3 to Step 2).
    bool identity_weighting = false;
    /// Use this matrix instead of the ARX estimate's R in the weighting.
    std::optional<Eigen::MatrixXd> R_override;
};

/// Step 3: weighted least squares with W built at theta_prev.
WnsfResult step3_wls(const ArxEstimate& eta, const ThetaParams& theta_prev, const ModelStructure& ms,
                     const Step3Options& options = {});

struct IterationOptions {
    int max_iter = 100;
    /// Stop when ||theta_{k+1} - theta_k|| / ||theta_k|| < tol.
    double tol = 1e-4;
};

/// Step 2 followed by repeated Step 3 passes. A weighting breakdown returns
/// the last valid iterate with converged = false.
WnsfResult iterate_wnsf(const ArxEstimate& eta, const ModelStructure& ms, const IterationOptions& options = {});

/// Fully parametric WNSF (dynamic and noise model) on the stacked null-space
/// relations C A - D = 0 and F B - L A = 0. max_iter = 1 gives the plain
/// three-step algorithm. With m_c = m_d = 0 this is the semi-parametric path.
WnsfResult fully_parametric_wnsf(const ArxEstimate& eta, const ModelStructure& ms,
                                 const IterationOptions& options = {});

/// Algorithm 1 (Steps 2-3), optionally iterated.
WnsfResult estimate_wnsf(const ArxEstimate& eta, const ModelStructure& ms, bool iterate,
                         const IterationOptions& options = {});

/// CSV: `stage,iterations,converged` header, value row, then `f_k`, `l_k`,
/// `c_k`, `d_k` rows.
void write_wnsf_csv(std::ostream& os, const WnsfResult& result);
WnsfResult read_wnsf_csv(std::istream& is);

}  // namespace wnsf
