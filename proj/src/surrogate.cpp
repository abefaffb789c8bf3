#include "morsekit/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace morsekit {

void VarianceConfig::validate() const {
    if (z < 0.0) throw validation_error("VarianceConfig: z must be >= 0");
    if (epsilon < 0.0) throw validation_error("VarianceConfig: epsilon must be >= 0");
}

namespace {

std::vector<double> median_length_scales(const Eigen::MatrixXd& inputs) {
    const auto n = inputs.rows();
    const auto d = inputs.cols();
    std::vector<double> ls(static_cast<std::size_t>(d), 1.0);
    for (Eigen::Index a = 0; a < d; ++a) {
        std::vector<double> dists;
        dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j)
                dists.push_back(std::abs(inputs(i, a) - inputs(j, a)));
        std::sort(dists.begin(), dists.end());
        double med = dists.empty() ? 0.0 : dists[dists.size() / 2];
        if (med <= 0.0) {
            // Degenerate axis: fall back to the input spread, then to unit scale.
            const double spread = inputs.col(a).maxCoeff() - inputs.col(a).minCoeff();
            med = spread > 0.0 ? spread : 1.0;
        }
        ls[static_cast<std::size_t>(a)] = med;
    }
    return ls;
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& inputs,
                                   const std::vector<double>& ls) {
    const auto n = inputs.rows();
    const auto d = inputs.cols();
    Eigen::MatrixXd r(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (Eigen::Index a = 0; a < d; ++a) {
                const double t = (inputs(i, a) - inputs(j, a)) / ls[static_cast<std::size_t>(a)];
                s += t * t;
            }
            r(i, j) = r(j, i) = std::exp(-0.5 * s);
        }
    }
    return r;
}

} // namespace

GpSurrogate GpSurrogate::fit(const std::vector<SamplePair>& pairs, const KernelConfig& config) {
    if (pairs.size() < 2) throw validation_error("fit: need at least 2 sample pairs");
    const std::size_t d_in = pairs.front().input.size();
    const std::size_t d_out = pairs.front().output.size();
    if (d_in == 0 || d_out == 0) throw validation_error("fit: zero-dimensional samples");
    for (const auto& p : pairs)
        if (p.input.size() != d_in || p.output.size() != d_out)
            throw validation_error("fit: inconsistent sample dimensions");
    if (config.jitter <= 0.0) throw validation_error("fit: jitter must be positive");

    GpSurrogate gp;
    const auto n = static_cast<Eigen::Index>(pairs.size());
    gp.inputs_.resize(n, static_cast<Eigen::Index>(d_in));
    Eigen::MatrixXd outputs(n, static_cast<Eigen::Index>(d_out));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < d_in; ++a)
            gp.inputs_(i, static_cast<Eigen::Index>(a)) = pairs[static_cast<std::size_t>(i)].input[a];
        for (std::size_t c = 0; c < d_out; ++c)
            outputs(i, static_cast<Eigen::Index>(c)) = pairs[static_cast<std::size_t>(i)].output[c];
    }

    bool inputs_distinct = false;
    for (Eigen::Index i = 1; i < n && !inputs_distinct; ++i)
        if (gp.inputs_.row(i) != gp.inputs_.row(0)) inputs_distinct = true;
    if (!inputs_distinct) throw validation_error("fit: all training inputs identical");

    gp.length_scales_ = config.length_scales ? *config.length_scales
                                             : median_length_scales(gp.inputs_);
    if (gp.length_scales_.size() != d_in)
        throw validation_error("fit: length_scales size must match input dimension");
    for (auto l : gp.length_scales_)
        if (!(l > 0.0)) throw validation_error("fit: length scales must be positive");

    gp.prior_mean_.resize(d_out);
    gp.signal_var_.resize(d_out);
    for (std::size_t c = 0; c < d_out; ++c) {
        const auto col = outputs.col(static_cast<Eigen::Index>(c));
        gp.prior_mean_[c] = col.mean();
        gp.signal_var_[c] = (col.array() - gp.prior_mean_[c]).square().sum() /
                            static_cast<double>(n);
    }

    const Eigen::MatrixXd corr = correlation_matrix(gp.inputs_, gp.length_scales_);
    double jitter = config.jitter;
    for (int attempt = 0;; ++attempt) {
        Eigen::MatrixXd k = corr;
        k.diagonal().array() += jitter;
        gp.llt_.compute(k);
        if (gp.llt_.info() == Eigen::Success) break;
        if (attempt >= config.max_jitter_escalations)
            throw numerical_error("fit: Cholesky failed after jitter escalation");
        jitter *= 10.0;
    }
    gp.jitter_used_ = jitter;
    gp.have_llt_ = true;

    gp.dual_weights_.resize(n, static_cast<Eigen::Index>(d_out));
    for (std::size_t c = 0; c < d_out; ++c) {
        Eigen::VectorXd centered =
            outputs.col(static_cast<Eigen::Index>(c)).array() - gp.prior_mean_[c];
        gp.dual_weights_.col(static_cast<Eigen::Index>(c)) = gp.llt_.solve(centered);
    }
    return gp;
}

Eigen::VectorXd GpSurrogate::correlation_vector(const std::vector<double>& x) const {
    const auto n = inputs_.rows();
    const auto d = inputs_.cols();
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index a = 0; a < d; ++a) {
            const double t =
                (x[static_cast<std::size_t>(a)] - inputs_(i, a)) / length_scales_[static_cast<std::size_t>(a)];
            s += t * t;
        }
        r(i) = std::exp(-0.5 * s);
    }
    return r;
}

Prediction GpSurrogate::predict(const std::vector<double>& x) const {
    if (x.size() != input_dim())
        throw validation_error("predict: query dimension mismatch");
    const Eigen::VectorXd r = correlation_vector(x);
    // Shared correlation across outputs: var_c = s_c^2 (1 + jitter - r' (R+jI)^-1 r).
    const double reduction = have_llt_ ? r.dot(llt_.solve(r)) : 0.0;

    Prediction out;
    out.mean.resize(output_dim());
    out.std.resize(output_dim());
    for (std::size_t c = 0; c < output_dim(); ++c) {
        out.mean[c] = prior_mean_[c] + r.dot(dual_weights_.col(static_cast<Eigen::Index>(c)));
        const double var = signal_var_[c] * (1.0 + jitter_used_ - reduction);
        out.std[c] = std::sqrt(std::max(0.0, var));
    }
    return out;
}

std::vector<std::vector<double>> cell_sample_points(const Box& cell, std::size_t budget) {
    const std::size_t d = cell.dim();
    const std::size_t corners = std::size_t{1} << d;
    std::vector<std::vector<double>> points;
    points.reserve(budget);
    for (std::size_t mask = 0; mask < corners; ++mask) {
        std::vector<double> p(d);
        for (std::size_t a = 0; a < d; ++a)
            p[a] = ((mask >> a) & 1) ? cell.upper[a] : cell.lower[a];
        points.push_back(std::move(p));
    }
    if (budget > corners) {
        const std::size_t remaining = budget - corners;
        std::size_t m = 0;
        while (true) {
            std::size_t count = 1;
            bool overflow = false;
            for (std::size_t a = 0; a < d; ++a) {
                count *= m + 1;
                if (count > remaining) { overflow = true; break; }
            }
            if (overflow) break;
            ++m;
        }
        if (m > 0) {
            std::size_t total = 1;
            for (std::size_t a = 0; a < d; ++a) total *= m;
            for (std::size_t lin = 0; lin < total; ++lin) {
                std::vector<double> p(d);
                std::size_t rem = lin;
                for (std::size_t a = 0; a < d; ++a) {
                    const std::size_t k = rem % m;
                    rem /= m;
                    p[a] = cell.lower[a] +
                           cell.extent(a) * (static_cast<double>(k + 1) / static_cast<double>(m + 1));
                }
                points.push_back(std::move(p));
            }
        }
    }
    return points;
}

Box GpSurrogate::image_box(const Box& cell, const VarianceConfig& cfg) const {
    cfg.validate();
    if (cell.dim() != input_dim())
        throw validation_error("image_box: cell dimension mismatch");
    std::size_t budget = cfg.samples_per_cell;
    if (budget == 0) {
        const std::size_t d = input_dim();
        std::size_t corners = std::size_t{1} << d;
        std::size_t lattice = 1;
        for (std::size_t a = 0; a < d; ++a) lattice *= 3;
        budget = std::min<std::size_t>(corners + lattice, 64);
    }
    const auto points = cell_sample_points(cell, budget);

    Box out;
    out.lower.assign(output_dim(), std::numeric_limits<double>::infinity());
    out.upper.assign(output_dim(), -std::numeric_limits<double>::infinity());
    for (const auto& p : points) {
        const auto pred = predict(p);
        for (std::size_t c = 0; c < output_dim(); ++c) {
            out.lower[c] = std::min(out.lower[c], pred.mean[c] - cfg.z * pred.std[c]);
            out.upper[c] = std::max(out.upper[c], pred.mean[c] + cfg.z * pred.std[c]);
        }
    }
    for (std::size_t c = 0; c < output_dim(); ++c) {
        const double pad = cfg.epsilon * (out.upper[c] - out.lower[c]);
        out.lower[c] -= pad;
        out.upper[c] += pad;
    }
    return out;
}

std::function<Box(const Box&)> GpSurrogate::box_image_fn(const VarianceConfig& cfg) const {
    return [gp = *this, cfg](const Box& cell) { return gp.image_box(cell, cfg); };
}

std::function<std::vector<double>(const std::vector<double>&)> GpSurrogate::mean_map() const {
    return [gp = *this](const std::vector<double>& x) { return gp.predict(x).mean; };
}

GpSurrogate::State GpSurrogate::state() const {
    return State{inputs_, dual_weights_, length_scales_, signal_var_, prior_mean_, jitter_used_};
}

GpSurrogate GpSurrogate::from_state(State s) {
    GpSurrogate gp;
    gp.inputs_ = std::move(s.inputs);
    gp.dual_weights_ = std::move(s.dual_weights);
    gp.length_scales_ = std::move(s.length_scales);
    gp.signal_var_ = std::move(s.signal_var);
    gp.prior_mean_ = std::move(s.prior_mean);
    gp.jitter_used_ = s.jitter_used;
    Eigen::MatrixXd k = correlation_matrix(gp.inputs_, gp.length_scales_);
    k.diagonal().array() += gp.jitter_used_;
    gp.llt_.compute(k);
    if (gp.llt_.info() != Eigen::Success)
        throw numerical_error("from_state: Cholesky failed on stored model");
    gp.have_llt_ = true;
    return gp;
}

} // namespace morsekit
