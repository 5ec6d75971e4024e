#include "sd2nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sd2nn/errors.hpp"
#include "sd2nn/rng.hpp"

namespace sd2nn {

namespace {

// stretch or shrink a positive non-decreasing base list to exactly m1 entries
Eigen::VectorXd fit_to_width(const std::vector<double>& base, int m1) {
    const int n = static_cast<int>(base.size());
    if (n == 0) throw ConfigError("lambda: empty base list");
    Eigen::VectorXd out(m1);
    if (n == m1) {
        for (int i = 0; i < m1; ++i) out[i] = base[i];
    } else if (n > m1) {
        // even subsample keeping the end points
        for (int i = 0; i < m1; ++i) {
            const long idx = (m1 == 1) ? 0
                                       : std::lround(static_cast<double>(i) * (n - 1) /
                                                     static_cast<double>(m1 - 1));
            out[i] = base[idx];
        }
    } else {
        // repeat entries with near-equal multiplicities (a_q with N_q copies)
        const int q = m1 / n, r = m1 % n;
        int k = 0;
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < q + (i < r ? 1 : 0); ++c) out[k++] = base[i];
    }
    return out;
}

void validate_lambda(const Eigen::VectorXd& lam) {
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (!(lam[i] > 0.0))
            throw ConfigError("lambda: scale factors must be strictly positive, entry " +
                              std::to_string(i) + " is " + std::to_string(lam[i]));
        if (i > 0 && lam[i] < lam[i - 1])
            throw ConfigError("lambda: scale factors must be non-decreasing");
    }
}

}  // namespace

Eigen::VectorXd resolve_lambda(const LambdaSpec& spec, int m1) {
    if (m1 < 1) throw ConfigError("lambda: first layer width must be >= 1");
    Eigen::VectorXd lam;
    switch (spec.kind) {
        case LambdaSpec::Kind::Ones:
            lam = Eigen::VectorXd::Ones(m1);
            break;
        case LambdaSpec::Kind::Arithmetic: {
            if (spec.step < 0.0) throw ConfigError("lambda: arithmetic step must be >= 0");
            const int count = spec.count > 0 ? spec.count : m1;
            std::vector<double> base(count);
            for (int i = 0; i < count; ++i) base[i] = spec.start + i * spec.step;
            lam = fit_to_width(base, m1);
            break;
        }
        case LambdaSpec::Kind::Explicit: {
            std::vector<double> base = spec.values;
            for (std::size_t i = 1; i < base.size(); ++i)
                if (base[i] < base[i - 1])
                    throw ConfigError("lambda: explicit list must be non-decreasing");
            lam = fit_to_width(base, m1);
            break;
        }
        case LambdaSpec::Kind::Gaussian: {
            if (spec.taus.empty()) throw ConfigError("lambda: gaussian spec needs stddevs");
            rng::Engine eng(spec.seed);
            std::vector<double> draws(m1);
            const int nb = static_cast<int>(spec.taus.size());
            for (int i = 0; i < m1; ++i) {
                const double tau = spec.taus[static_cast<std::size_t>(i) * nb / m1];
                double g = std::abs(eng.gaussian()) * tau;
                while (!(g > 0.0)) g = std::abs(eng.gaussian()) * tau;
                draws[i] = g;
            }
            // magnitudes sorted ascending: cos/sin features are insensitive to
            // the sign of the scale, and the ascending-order invariant holds
            std::sort(draws.begin(), draws.end());
            lam = fit_to_width(draws, m1);
            break;
        }
    }
    validate_lambda(lam);
    return lam;
}

ScaledNet ScaledNet::build(int input_dim, const std::vector<int>& widths,
                           const LambdaSpec& lambda_spec, const Activation& first_act,
                           const Activation& hidden_act, bool resnet, std::uint64_t seed) {
    if (input_dim < 1) throw ConfigError("network: input dimension must be >= 1");
    if (widths.empty()) throw ConfigError("network: at least one hidden layer required");
    for (int m : widths)
        if (m < 1) throw ConfigError("network: layer widths must be >= 1");

    ScaledNet net;
    net.input_dim = input_dim;
    net.widths = widths;
    net.first_act = first_act;
    net.hidden_act = hidden_act;
    net.resnet = resnet;
    net.lambda = resolve_lambda(lambda_spec, widths[0]);

    rng::Engine eng(seed);
    const int L = static_cast<int>(widths.size());
    int in_f = input_dim;
    for (int l = 0; l <= L; ++l) {
        const int out = (l < L) ? widths[l] : 1;
        ad::RowMat W(out, in_f);
        Eigen::VectorXd B(out);
        const double sigma = std::sqrt(2.0 / (in_f + out));
        for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = sigma * eng.gaussian();
        for (Eigen::Index i = 0; i < B.size(); ++i) B[i] = sigma * eng.gaussian();
        net.w.push_back(std::move(W));
        net.b.push_back(std::move(B));
        const Activation& a = (l == 0) ? first_act : hidden_act;
        in_f = (l < L) ? a.out_width(out) : 1;
    }
    return net;
}

long ScaledNet::n_params() const {
    long n = 0;
    for (std::size_t l = 0; l < w.size(); ++l) n += w[l].size() + b[l].size();
    return n;
}

void ScaledNet::copy_params_to(Eigen::Ref<Eigen::VectorXd> flat) const {
    long off = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        flat.segment(off, w[l].size()) = Eigen::Map<const Eigen::VectorXd>(w[l].data(), w[l].size());
        off += w[l].size();
        flat.segment(off, b[l].size()) = b[l];
        off += b[l].size();
    }
}

void ScaledNet::copy_params_from(const Eigen::Ref<const Eigen::VectorXd>& flat) {
    long off = 0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        Eigen::Map<Eigen::VectorXd>(w[l].data(), w[l].size()) = flat.segment(off, w[l].size());
        off += w[l].size();
        b[l] = flat.segment(off, b[l].size());
        off += b[l].size();
    }
}

ad::NodeId ScaledNet::record(ad::Tape& tape, ad::NodeId xin, long base_offset, int sub) const {
    const bool train = base_offset >= 0;
    const int L = static_cast<int>(widths.size());
    long off = base_offset;
    ad::NodeId cur = xin;
    int cur_width = input_dim;
    for (int l = 0; l <= L; ++l) {
        const long w_off = train ? off : -1;
        const long b_off = train ? off + w[l].size() : -1;
        if (train) off += w[l].size() + b[l].size();
        ad::NodeId z = tape.affine(cur, w[l], b[l], w_off, b_off, sub, l);
        if (l == L) return z;  // linear output layer
        if (l == 0) z = tape.scale(z, lambda, sub);
        const Activation& a = (l == 0) ? first_act : hidden_act;
        ad::NodeId h = tape.activation(z, a, sub, l);
        const int out_w = a.out_width(static_cast<int>(w[l].rows()));
        if (resnet && l > 0 && out_w == cur_width) h = tape.add(cur, h);
        cur = h;
        cur_width = out_w;
    }
    throw TapeError("unreachable");
}

Eigen::VectorXd ScaledNet::eval(const Eigen::MatrixXd& x) const {
    ad::Tape tape;
    ad::NodeId y = record(tape, tape.input(x, false), -1, 0);
    return tape.value(y).col(0);
}

void ScaledNet::forward_with_input_grad(const Eigen::MatrixXd& x, Eigen::VectorXd* y,
                                        Eigen::MatrixXd* gy) const {
    ad::Tape tape;
    ad::NodeId out = record(tape, tape.input(x, true), -1, 0);
    if (y) *y = tape.value(out).col(0);
    if (gy) {
        gy->resize(x.rows(), x.cols());
        const auto& tg = tape.tangents(out);
        for (Eigen::Index j = 0; j < x.cols(); ++j) gy->col(j) = tg[j].col(0);
    }
}

}  // namespace sd2nn
