#include "hinf/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hinf/kernels.hpp"
#include "hinf/rng.hpp"

namespace hinf {

void NetConfig::validate() const {
    require(input_dim >= 1 && dtheta >= 1, errc::config, "BadNetConfig",
            "input_dim and dtheta must be >= 1");
    for (std::size_t w : hidden)
        require(w >= 1, errc::config, "BadNetConfig", "hidden widths must be >= 1");
    require(std::isfinite(bound) ? bound > 0.0 : true, errc::config, "BadNetConfig",
            "bound must be positive or infinite");
    if (!head_partition.empty()) {
        require(head_partition.size() == dtheta, errc::config, "BadNetConfig",
                "head_partition must cover every parameter");
        for (const auto& [k, subset] : head_partition) {
            require(k < dtheta, errc::config, "BadNetConfig", "head_partition key out of range");
            require(!subset.empty(), errc::config, "BadNetConfig",
                    "head_partition subsets must be non-empty");
            for (std::size_t j : subset)
                require(j < input_dim, errc::config, "BadNetConfig",
                        "head_partition input index out of range");
        }
    }
    for (std::size_t k : positive_params)
        require(k < dtheta, errc::config, "BadNetConfig", "positive_params index out of range");
}

StructuredNet::StructuredNet(NetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    positive_.assign(cfg_.dtheta, false);
    for (std::size_t k : cfg_.positive_params) positive_[k] = true;

    if (cfg_.head_partition.empty()) {
        Group g;
        g.inputs.resize(cfg_.input_dim);
        for (std::size_t i = 0; i < cfg_.input_dim; ++i) g.inputs[i] = i;
        g.params.resize(cfg_.dtheta);
        for (std::size_t k = 0; k < cfg_.dtheta; ++k) g.params[k] = k;
        groups_.push_back(std::move(g));
    } else {
        for (const auto& [k, subset] : cfg_.head_partition) {
            Group g;
            g.inputs = subset;
            g.params = {k};
            groups_.push_back(std::move(g));
        }
    }

    Rng rng(cfg_.seed ^ 0x5e70a1u);
    for (Group& g : groups_) {
        std::size_t prev = g.inputs.size();
        for (std::size_t width : cfg_.hidden) {
            Mat w(width, prev);
            const double r = std::sqrt(6.0 / static_cast<double>(prev));
            for (std::size_t i = 0; i < width * prev; ++i) w.data()[i] = rng.uniform(-r, r);
            g.w.push_back(std::move(w));
            g.b.emplace_back(width, 0.0);
            prev = width;
        }
        Mat head(g.params.size(), prev);
        const double r = std::sqrt(6.0 / static_cast<double>(prev));
        for (std::size_t i = 0; i < head.rows() * prev; ++i) head.data()[i] = rng.uniform(-r, r);
        g.w.push_back(std::move(head));
        g.b.emplace_back(g.params.size(), 0.0);
    }
}

double StructuredNet::transform(double z, std::size_t k) const {
    double c = z;
    if (std::isfinite(cfg_.bound)) c = cfg_.bound * std::tanh(z / cfg_.bound);
    return positive_[k] ? softplus(c) : c;
}

double StructuredNet::transform_deriv(double z, std::size_t k) const {
    double c = z, dc = 1.0;
    if (std::isfinite(cfg_.bound)) {
        const double th = std::tanh(z / cfg_.bound);
        c = cfg_.bound * th;
        dc = 1.0 - th * th;
    }
    return positive_[k] ? logistic(c) * dc : dc;
}

namespace {

// Per-group forward/backward scratch. Sized once, reused across observations.
struct GroupScratch {
    std::vector<std::vector<double>> a;   // activations, a[0] = gathered input
    std::vector<std::vector<double>> z;   // pre-activations per hidden layer
    std::vector<double> zh;               // parameter-layer pre-activations
    std::vector<std::vector<double>> da;  // backward buffers
    std::vector<double> dz;
};

void size_scratch(const StructuredNet::Group& g, GroupScratch& s) {
    const std::size_t n_hidden = g.w.size() - 1;
    s.a.resize(n_hidden + 1);
    s.z.resize(n_hidden);
    s.da.resize(n_hidden + 1);
    s.a[0].resize(g.inputs.size());
    s.da[0].resize(g.inputs.size());
    for (std::size_t l = 0; l < n_hidden; ++l) {
        s.z[l].resize(g.w[l].rows());
        s.a[l + 1].resize(g.w[l].rows());
        s.da[l + 1].resize(g.w[l].rows());
    }
    s.zh.resize(g.w.back().rows());
    s.dz.resize(s.zh.size());
    for (auto& v : s.z) s.dz.resize(std::max(s.dz.size(), v.size()));
}

void group_forward(const StructuredNet::Group& g, cspan x, GroupScratch& s) {
    for (std::size_t j = 0; j < g.inputs.size(); ++j) s.a[0][j] = x[g.inputs[j]];
    const std::size_t n_hidden = g.w.size() - 1;
    for (std::size_t l = 0; l < n_hidden; ++l) {
        kernels::matvec(g.w[l].data(), g.w[l].rows(), g.w[l].cols(), s.a[l].data(),
                        s.z[l].data());
        for (std::size_t i = 0; i < s.z[l].size(); ++i) s.z[l][i] += g.b[l][i];
        kernels::relu_forward(s.z[l].data(), s.a[l + 1].data(), s.z[l].size());
    }
    const Mat& head = g.w.back();
    kernels::matvec(head.data(), head.rows(), head.cols(), s.a[n_hidden].data(), s.zh.data());
    for (std::size_t i = 0; i < s.zh.size(); ++i) s.zh[i] += g.b.back()[i];
}

}  // namespace

Vec StructuredNet::theta_forward(cspan x) const {
    require(x.size() == cfg_.input_dim, errc::numeric, "DimMismatch",
            "theta_forward expects x of length " + std::to_string(cfg_.input_dim));
    for (double v : x)
        require(std::isfinite(v), errc::numeric, "NonFinite", "theta_forward input not finite");
    std::vector<double> theta(cfg_.dtheta, 0.0);
    GroupScratch s;
    for (const Group& g : groups_) {
        size_scratch(g, s);
        group_forward(g, x, s);
        for (std::size_t j = 0; j < g.params.size(); ++j)
            theta[g.params[j]] = transform(s.zh[j], g.params[j]);
    }
    return Vec::from(std::move(theta));
}

std::size_t StructuredNet::param_count() const {
    std::size_t n = 0;
    for (const Group& g : groups_)
        for (std::size_t l = 0; l < g.w.size(); ++l)
            n += g.w[l].rows() * g.w[l].cols() + g.b[l].len();
    return n;
}

std::vector<double> StructuredNet::flat_params() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (const Group& g : groups_)
        for (std::size_t l = 0; l < g.w.size(); ++l) {
            out.insert(out.end(), g.w[l].data(), g.w[l].data() + g.w[l].rows() * g.w[l].cols());
            out.insert(out.end(), g.b[l].data(), g.b[l].data() + g.b[l].len());
        }
    return out;
}

void StructuredNet::set_flat_params(cspan p) {
    require(p.size() == param_count(), errc::numeric, "DimMismatch",
            "set_flat_params length mismatch");
    std::size_t off = 0;
    for (Group& g : groups_)
        for (std::size_t l = 0; l < g.w.size(); ++l) {
            const std::size_t wn = g.w[l].rows() * g.w[l].cols();
            std::copy(p.begin() + off, p.begin() + off + wn, g.w[l].data());
            off += wn;
            std::copy(p.begin() + off, p.begin() + off + g.b[l].len(), g.b[l].data());
            off += g.b[l].len();
        }
}

std::vector<double> StructuredNet::backprop_weight_gradient(cspan x, cspan dl_dtheta) const {
    std::vector<double> grad(param_count(), 0.0);
    backprop_accumulate(x, dl_dtheta, grad);
    return grad;
}

void StructuredNet::backprop_accumulate(cspan x, cspan dl_dtheta, mspan grad_out) const {
    require(dl_dtheta.size() == cfg_.dtheta, errc::numeric, "DimMismatch",
            "backprop dl_dtheta length");
    require(grad_out.size() == param_count(), errc::numeric, "DimMismatch",
            "backprop gradient buffer length");
    double* grad = grad_out.data();
    thread_local GroupScratch s;
    std::size_t off = 0;
    for (const Group& g : groups_) {
        size_scratch(g, s);
        group_forward(g, x, s);
        const std::size_t n_hidden = g.w.size() - 1;

        // Chain the model-layer gradient through the output transform.
        std::vector<double> dzh(g.params.size());
        for (std::size_t j = 0; j < g.params.size(); ++j)
            dzh[j] = dl_dtheta[g.params[j]] * transform_deriv(s.zh[j], g.params[j]);

        // Offsets of each layer inside the flat gradient.
        std::vector<std::size_t> layer_off(g.w.size());
        std::size_t o = off;
        for (std::size_t l = 0; l < g.w.size(); ++l) {
            layer_off[l] = o;
            o += g.w[l].rows() * g.w[l].cols() + g.b[l].len();
        }

        const Mat& head = g.w.back();
        kernels::ger(grad + layer_off[n_hidden], head.rows(), head.cols(), 1.0,
                     dzh.data(), s.a[n_hidden].data());
        kernels::axpy(1.0, dzh.data(),
                      grad + layer_off[n_hidden] + head.rows() * head.cols(),
                      head.rows());
        std::fill(s.da[n_hidden].begin(), s.da[n_hidden].end(), 0.0);
        kernels::matvec_t_acc(head.data(), head.rows(), head.cols(), dzh.data(),
                              s.da[n_hidden].data());

        for (std::size_t l = n_hidden; l-- > 0;) {
            s.dz.resize(s.z[l].size());
            kernels::relu_backward(s.z[l].data(), s.da[l + 1].data(), s.dz.data(),
                                   s.z[l].size());
            kernels::ger(grad + layer_off[l], g.w[l].rows(), g.w[l].cols(), 1.0,
                         s.dz.data(), s.a[l].data());
            kernels::axpy(1.0, s.dz.data(),
                          grad + layer_off[l] + g.w[l].rows() * g.w[l].cols(),
                          g.w[l].rows());
            std::fill(s.da[l].begin(), s.da[l].end(), 0.0);
            kernels::matvec_t_acc(g.w[l].data(), g.w[l].rows(), g.w[l].cols(), s.dz.data(),
                                  s.da[l].data());
        }
        off = o;
    }
}

std::vector<double> StructuredNet::tape_weight_gradient(cspan x, cspan dl_dtheta) const {
    require(dl_dtheta.size() == cfg_.dtheta, errc::numeric, "DimMismatch",
            "tape gradient dl_dtheta length");
    Tape tape;
    std::vector<Tape::id> theta_nodes(cfg_.dtheta, -1);
    for (const Group& g : groups_) {
        // Register leaves in the flat-parameter order (all weights of a layer
        // row-major, then its biases) so adjoints line up with flat_params().
        std::vector<std::vector<Tape::id>> w_leaf(g.w.size()), b_leaf(g.w.size());
        for (std::size_t l = 0; l < g.w.size(); ++l) {
            for (std::size_t i = 0; i < g.w[l].rows(); ++i)
                for (std::size_t j = 0; j < g.w[l].cols(); ++j)
                    w_leaf[l].push_back(tape.leaf(g.w[l](i, j)));
            for (std::size_t i = 0; i < g.b[l].len(); ++i)
                b_leaf[l].push_back(tape.leaf(g.b[l][i]));
        }
        std::vector<Tape::id> act;
        for (std::size_t j : g.inputs) act.push_back(tape.constant(x[j]));
        const std::size_t n_hidden = g.w.size() - 1;
        for (std::size_t l = 0; l < g.w.size(); ++l) {
            std::vector<Tape::id> next;
            for (std::size_t i = 0; i < g.w[l].rows(); ++i) {
                Tape::id acc = -1;
                for (std::size_t j = 0; j < g.w[l].cols(); ++j) {
                    Tape::id term = tape.mul(w_leaf[l][i * g.w[l].cols() + j], act[j]);
                    acc = (acc < 0) ? term : tape.add(acc, term);
                }
                acc = tape.add(acc, b_leaf[l][i]);
                next.push_back(l < n_hidden ? tape.relu_(acc) : acc);
            }
            act = std::move(next);
        }
        for (std::size_t j = 0; j < g.params.size(); ++j) {
            Tape::id z = act[j];
            const std::size_t k = g.params[j];
            if (std::isfinite(cfg_.bound)) {
                Tape::id scaled = tape.mul(z, tape.constant(1.0 / cfg_.bound));
                z = tape.mul(tape.constant(cfg_.bound), tape.tanh_(scaled));
            }
            if (positive_[k]) z = tape.softplus_(z);
            theta_nodes[k] = z;
        }
    }
    Tape::id out = -1;
    for (std::size_t k = 0; k < cfg_.dtheta; ++k) {
        Tape::id term = tape.mul(tape.constant(dl_dtheta[k]), theta_nodes[k]);
        out = (out < 0) ? term : tape.add(out, term);
    }
    return tape.grad_reverse(out);
}

std::size_t suggest_width(std::size_t n, std::size_t d_c, std::size_t smoothness) {
    require(n >= 2 && d_c >= 1 && smoothness >= 1, errc::config, "BadNetConfig",
            "suggest_width needs n >= 2, d_c >= 1, p >= 1");
    const double nn = static_cast<double>(n);
    const double expo = static_cast<double>(d_c) / (2.0 * (smoothness + d_c));
    const double logn = std::log(nn);
    const double h = std::pow(nn, expo) * logn * logn;
    return std::max<std::size_t>(4, static_cast<std::size_t>(std::lround(h)));
}

StructuredNet train(const StructuredNet& net, const Dataset& data, const LossModel& loss,
                    const TrainConfig& cfg, TrainTrace* trace) {
    const NetConfig& nc = net.config();
    require(data.dy() == loss.dy && data.dt() == loss.dt && data.dx() == nc.input_dim &&
                nc.dtheta == loss.dtheta,
            errc::config, "DimMismatch", "train: data/loss/net dimensions disagree");
    require(cfg.learning_rate > 0.0, errc::config, "BadTrainConfig", "learning_rate must be > 0");
    require(cfg.batch_size >= 1 && data.n >= 2 * cfg.batch_size, errc::config, "BadTrainConfig",
            "need at least 2*batch_size rows");
    require(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0, errc::config, "BadTrainConfig",
            "val_fraction must be in [0,1)");

    StructuredNet fitted = net;
    if (trace) *trace = TrainTrace{};
    if (cfg.epochs == 0) return fitted;

    Rng rng(cfg.shuffle_seed ^ 0x7a315eed1234ULL);

    std::vector<std::size_t> order(data.n);
    for (std::size_t i = 0; i < data.n; ++i) order[i] = i;
    rng.shuffle(order);
    const std::size_t n_val = static_cast<std::size_t>(cfg.val_fraction * data.n);
    std::vector<std::size_t> val_idx(order.end() - n_val, order.end());
    std::vector<std::size_t> train_idx(order.begin(), order.end() - n_val);
    require(train_idx.size() >= cfg.batch_size, errc::config, "BadTrainConfig",
            "validation split leaves fewer rows than one batch");

    const std::size_t P = fitted.param_count();
    std::vector<double> params = fitted.flat_params();
    std::vector<double> grad(P), m(P, 0.0), v(P, 0.0);
    std::vector<double> best_params = params;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0, since_best = 0, adam_t = 0;

    auto mean_loss_over = [&](const std::vector<std::size_t>& idx) {
        double s = 0.0;
        for (std::size_t i : idx)
            s += loss.value(data.y_row(i), data.t_row(i), fitted.theta_forward(data.x_row(i)).span());
        return s / static_cast<double>(idx.size());
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(train_idx);
        double epoch_loss = 0.0;
        std::size_t epoch_count = 0;
        const std::size_t n_batches = train_idx.size() / cfg.batch_size;
        for (std::size_t bi = 0; bi < n_batches; ++bi) {
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            try {
                for (std::size_t o = 0; o < cfg.batch_size; ++o) {
                    const std::size_t i = train_idx[bi * cfg.batch_size + o];
                    Vec theta = fitted.theta_forward(data.x_row(i));
                    batch_loss += loss.value(data.y_row(i), data.t_row(i), theta.span());
                    Vec dl = loss.grad(data.y_row(i), data.t_row(i), theta.span());
                    for (std::size_t k = 0; k < dl.len(); ++k) dl[k] /= cfg.batch_size;
                    fitted.backprop_accumulate(data.x_row(i), dl.span(), grad);
                }
            } catch (const Error& e) {
                if (e.kind() == "NonFinite")
                    fail(errc::numeric, "NonFiniteLoss",
                         "training diverged at epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(bi));
                throw;
            }
            batch_loss /= cfg.batch_size;
            require(std::isfinite(batch_loss), errc::numeric, "NonFiniteLoss",
                    "training diverged at epoch " + std::to_string(epoch) + " batch " +
                        std::to_string(bi));
            epoch_loss += batch_loss;
            ++epoch_count;

            // Adam with bias correction.
            ++adam_t;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t));
            for (std::size_t p = 0; p < P; ++p) {
                m[p] = cfg.beta1 * m[p] + (1.0 - cfg.beta1) * grad[p];
                v[p] = cfg.beta2 * v[p] + (1.0 - cfg.beta2) * grad[p] * grad[p];
                params[p] -= cfg.learning_rate * (m[p] / bc1) /
                             (std::sqrt(v[p] / bc2) + cfg.eps_adam);
            }
            fitted.set_flat_params(params);
        }

        if (trace) trace->train_loss.push_back(epoch_loss / std::max<std::size_t>(1, epoch_count));
        if (n_val > 0) {
            const double vl = mean_loss_over(val_idx);
            require(std::isfinite(vl), errc::numeric, "NonFiniteLoss",
                    "validation loss diverged at epoch " + std::to_string(epoch));
            if (trace) trace->val_loss.push_back(vl);
            if (vl < best_val) {
                best_val = vl;
                best_params = params;
                best_epoch = epoch;
                since_best = 0;
            } else if (++since_best > cfg.patience) {
                if (trace) trace->epochs_run = epoch + 1;
                break;
            }
        }
        if (trace) trace->epochs_run = epoch + 1;
    }

    if (n_val > 0) fitted.set_flat_params(best_params);
    if (trace) trace->best_epoch = best_epoch;
    return fitted;
}

}  // namespace hinf
