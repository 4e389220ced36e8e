#include "cosmo/network.hpp"

#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

#include "cosmo/complex_math.hpp"
#include "cosmo/expression.hpp"
#include "cosmo/optim.hpp"

namespace cosmo {

double bounded_param(double raw, double lower, double upper) {
    if (!(lower < upper)) throw InvalidArgument("bounded_param: lower bound must be below upper bound");
    const double s = raw >= 0.0 ? 1.0 / (1.0 + std::exp(-raw)) : std::exp(raw) / (1.0 + std::exp(raw));
    return lower + (upper - lower) * s;
}

double bounded_param_slope(double raw, double lower, double upper) {
    if (!(lower < upper)) throw InvalidArgument("bounded_param: lower bound must be below upper bound");
    const double s = raw >= 0.0 ? 1.0 / (1.0 + std::exp(-raw)) : std::exp(raw) / (1.0 + std::exp(raw));
    return (upper - lower) * s * (1.0 - s);
}

void NetworkConfig::validate() const {
    if (depth < 2) throw InvalidArgument("network: depth must be at least 2");
    if (width < 1) throw InvalidArgument("network: width must be at least 1");
    if (in_dim < 1 || out_dim < 1) throw InvalidArgument("network: input and output dimensions must be positive");
    if (!(bandwidth.lower < bandwidth.upper) || !(zeta.lower < zeta.upper))
        throw InvalidArgument("network: every bound pair needs lower < upper");
    if (trains_bandwidth() && bandwidth.lower < 0.0) throw InvalidArgument("network: T bounds must be non-negative");
    if (trains_zeta() && zeta.lower < 0.0) throw InvalidArgument("network: zeta bounds must be non-negative");
    activation.validate();
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {
    config_.validate();
    const int hidden = config_.hidden_layers();
    std::mt19937_64 gen(derive_seed(config_.seed, "init"));
    const auto uniform = [&gen](double r) { return r * (2.0 * unit_double(gen()) - 1.0); };
    const bool siren = config_.init == WeightInit::Siren;
    const double omega0 = config_.activation.base().kind() == ActivationKind::Sine ? config_.activation.base().omega0()
                                                                                    : 1.0;
    for (int l = 0; l <= hidden; ++l) {
        const int fan_in = l == 0 ? config_.in_dim : config_.width;
        const int fan_out = l == hidden ? config_.out_dim : config_.width;
        Layer layer{Eigen::MatrixXcd::Zero(fan_out, fan_in), Eigen::VectorXcd::Zero(fan_out)};
        double range = std::sqrt(6.0 / fan_in);
        if (siren) range = l == 0 ? 1.0 / fan_in : range / omega0;
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
            for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
                const double re = uniform(range);
                const double im = config_.complex_weights ? uniform(range) : 0.0;
                layer.weight(i, j) = Complex(re, im);
            }
        if (siren) {
            const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = Complex(uniform(b), 0.0);
        }
        layers_.push_back(std::move(layer));
    }
    raw_act_ = Eigen::MatrixXd::Zero(hidden, config_.activation_params_per_layer());
}

Network init_network(const NetworkConfig& config) { return Network(config); }

double Network::bandwidth(int hidden_layer) const {
    if (!config_.trains_bandwidth()) return config_.activation.base().bandwidth();
    return bounded_param(raw_act_(hidden_layer, 0), config_.bandwidth.lower, config_.bandwidth.upper);
}

double Network::zeta(int hidden_layer) const {
    if (!config_.trains_zeta()) return config_.activation.zeta();
    const int col = config_.trains_bandwidth() ? 1 : 0;
    return bounded_param(raw_act_(hidden_layer, col), config_.zeta.lower, config_.zeta.upper);
}

ActivationSpec Network::layer_activation(int hidden_layer) const {
    ActivationSpec spec = config_.activation;
    if (config_.trains_bandwidth()) spec = spec.with_bandwidth(bandwidth(hidden_layer));
    if (config_.trains_zeta()) spec = spec.with_zeta(zeta(hidden_layer));
    return spec;
}

Eigen::Index Network::parameter_count() const {
    Eigen::Index n = raw_act_.size();
    for (const Layer& layer : layers_) n += 2 * (layer.weight.size() + layer.bias.size());
    return n;
}

Eigen::VectorXd Network::parameters() const {
    Eigen::VectorXd flat(parameter_count());
    Eigen::Index k = 0;
    const auto put = [&](const Complex* data, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            flat(k++) = data[i].real();
            flat(k++) = data[i].imag();
        }
    };
    for (const Layer& layer : layers_) {
        put(layer.weight.data(), layer.weight.size());
        put(layer.bias.data(), layer.bias.size());
    }
    for (Eigen::Index r = 0; r < raw_act_.rows(); ++r)
        for (Eigen::Index c = 0; c < raw_act_.cols(); ++c) flat(k++) = raw_act_(r, c);
    return flat;
}

void Network::set_parameters(const Eigen::VectorXd& flat) {
    if (flat.size() != parameter_count())
        throw InvalidArgument("set_parameters: expected " + std::to_string(parameter_count()) + " values, got " +
                              std::to_string(flat.size()));
    Eigen::Index k = 0;
    const auto get = [&](Complex* data, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double re = flat(k++);
            const double im = flat(k++);
            data[i] = Complex(re, im);
        }
    };
    for (Layer& layer : layers_) {
        get(layer.weight.data(), layer.weight.size());
        get(layer.bias.data(), layer.bias.size());
    }
    for (Eigen::Index r = 0; r < raw_act_.rows(); ++r)
        for (Eigen::Index c = 0; c < raw_act_.cols(); ++c) raw_act_(r, c) = flat(k++);
}

Eigen::VectorXcd normalize_layer(const Eigen::VectorXcd& z) {
    double peak = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) peak = std::max(peak, std::abs(z(i)));
    if (peak <= 1.0) return z;
    return z / peak;
}

namespace {

struct LayerCache {
    Eigen::MatrixXcd input_complex;  // unused for the first layer
    Eigen::MatrixXcd output;         // normalized activation, width x n
    Eigen::VectorXd scale;           // per-sample divisor (>= 1)
    std::vector<Eigen::Index> peak;  // per-sample index of the largest modulus
    Eigen::MatrixXcd d_input;
    Eigen::MatrixXcd d_bandwidth;
    Eigen::MatrixXcd d_zeta;
};

void check_coords(const Network& net, const Eigen::MatrixXd& coords) {
    if (coords.cols() != net.config().in_dim)
        throw InvalidArgument("forward: expected " + std::to_string(net.config().in_dim) + " coordinate columns, got " +
                              std::to_string(coords.cols()));
    for (Eigen::Index i = 0; i < coords.size(); ++i)
        if (!(std::abs(coords.data()[i]) <= 1.0))
            throw InvalidArgument("forward: coordinates must lie in [-1, 1]");
}

// Activation + normalization of one pre-activation block, in place.
void activate(const Network& net, int l, Eigen::MatrixXcd& u, LayerCache& cache, bool keep) {
    const ActivationKernel kernel(net.layer_activation(l));
    const Eigen::Index n = u.cols();
    const Eigen::Index w = u.rows();
    if (keep) {
        cache.d_input.resize(w, n);
        cache.d_bandwidth.resize(w, n);
        cache.d_zeta.resize(w, n);
    }
    cache.scale.resize(n);
    cache.peak.assign(static_cast<std::size_t>(n), 0);

    Complex* data = u.data();
    if (keep) {
        kernel.partials(data, u.size(), data, cache.d_input.data(), cache.d_bandwidth.data(), cache.d_zeta.data());
    } else {
        kernel.values(data, u.size(), data);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        double best = -1.0;
        Eigen::Index arg = 0;
        for (Eigen::Index i = 0; i < w; ++i) {
            const double m = std::norm(data[j * w + i]);
            if (m > best) {
                best = m;
                arg = i;
            }
        }
        const double s = std::max(std::sqrt(best), 1.0);
        cache.scale(j) = s;
        cache.peak[static_cast<std::size_t>(j)] = arg;
        if (s > 1.0)
            for (Eigen::Index i = 0; i < w; ++i) data[j * w + i] /= s;
    }
    cache.output = std::move(u);
}

// Returns the complex pre-readout of the final layer (out_dim x n).
Eigen::MatrixXcd run(const Network& net, const Eigen::MatrixXd& coords, std::vector<LayerCache>& caches, bool keep) {
    check_coords(net, coords);
    const auto& layers = net.layers();
    const int hidden = net.config().hidden_layers();
    caches.assign(static_cast<std::size_t>(hidden), LayerCache{});
    const Eigen::MatrixXcd x = coords.transpose().cast<Complex>();
    for (int l = 0; l < hidden; ++l) {
        const Layer& layer = layers[static_cast<std::size_t>(l)];
        const Eigen::MatrixXcd& h = l == 0 ? x : caches[static_cast<std::size_t>(l - 1)].output;
        Eigen::MatrixXcd u(layer.weight.rows(), h.cols());
        u.noalias() = layer.weight * h;
        u.colwise() += layer.bias;
        activate(net, l, u, caches[static_cast<std::size_t>(l)], keep);
    }
    const Layer& last = layers.back();
    const Eigen::MatrixXcd& h = hidden == 0 ? x : caches.back().output;
    Eigen::MatrixXcd z(last.weight.rows(), h.cols());
    z.noalias() = last.weight * h;
    z.colwise() += last.bias;
    return z;
}

}  // namespace

Eigen::MatrixXd forward(const Network& net, const Eigen::MatrixXd& coords) {
    std::vector<LayerCache> caches;
    return run(net, coords, caches, false).real().transpose();
}

ForwardResult forward_with_taps(const Network& net, const Eigen::MatrixXd& coords) {
    std::vector<LayerCache> caches;
    ForwardResult r;
    r.output = run(net, coords, caches, false).real().transpose();
    for (auto& c : caches) r.hidden.push_back(std::move(c.output));
    return r;
}

double masked_mse(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& targets,
                  const Eigen::VectorXd* sample_mask) {
    if (prediction.rows() != targets.rows() || prediction.cols() != targets.cols())
        throw InvalidArgument("mse: prediction and target shapes differ");
    if (!sample_mask) return (prediction - targets).squaredNorm() / static_cast<double>(prediction.size());
    if (sample_mask->size() != prediction.rows()) throw InvalidArgument("mse: mask length differs from sample count");
    double acc = 0.0;
    double count = 0.0;
    for (Eigen::Index i = 0; i < prediction.rows(); ++i) {
        if ((*sample_mask)(i) == 0.0) continue;
        acc += (prediction.row(i) - targets.row(i)).squaredNorm();
        count += 1.0;
    }
    if (count == 0.0) throw InvalidArgument("mse: mask selects no samples");
    return acc / (count * static_cast<double>(prediction.cols()));
}

LossGradient loss_and_gradient(const Network& net, const Eigen::MatrixXd& coords, const Eigen::MatrixXd& targets,
                               const Eigen::VectorXd* sample_mask) {
    if (targets.rows() != coords.rows() || targets.cols() != net.config().out_dim)
        throw InvalidArgument("loss_and_gradient: targets must be n x out_dim matching the coordinates");
    std::vector<LayerCache> caches;
    const Eigen::MatrixXcd z = run(net, coords, caches, true);

    LossGradient out;
    out.output = z.real().transpose();
    out.loss = masked_mse(out.output, targets, sample_mask);

    const Eigen::Index n = coords.rows();
    const int hidden = net.config().hidden_layers();
    const auto& layers = net.layers();

    // dL/dRe(z); the imaginary part of the readout never reaches the loss.
    Eigen::MatrixXd residual = (out.output - targets).transpose();
    double count = static_cast<double>(n);
    if (sample_mask) {
        count = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if ((*sample_mask)(j) == 0.0)
                residual.col(j).setZero();
            else
                count += 1.0;
        }
    }
    Eigen::MatrixXcd g = (residual * (2.0 / (count * static_cast<double>(targets.cols())))).cast<Complex>();

    std::vector<Eigen::MatrixXcd> grad_w(layers.size());
    std::vector<Eigen::VectorXcd> grad_b(layers.size());
    Eigen::MatrixXd grad_act = Eigen::MatrixXd::Zero(hidden, net.config().activation_params_per_layer());
    const Eigen::MatrixXcd x = coords.transpose().cast<Complex>();

    for (int l = hidden; l >= 0; --l) {
        const Layer& layer = layers[static_cast<std::size_t>(l)];
        const Eigen::MatrixXcd& h = l == 0 ? x : caches[static_cast<std::size_t>(l - 1)].output;
        grad_w[static_cast<std::size_t>(l)].noalias() = g * h.adjoint();
        grad_b[static_cast<std::size_t>(l)] = g.rowwise().sum();
        if (l == 0) break;

        Eigen::MatrixXcd gh(layer.weight.cols(), n);
        gh.noalias() = layer.weight.adjoint() * g;

        // Back through normalization and activation of hidden layer l - 1.
        const LayerCache& c = caches[static_cast<std::size_t>(l - 1)];
        const Eigen::Index w = gh.rows();
        Complex* ga = gh.data();
        const Complex* hn = c.output.data();
        for (Eigen::Index j = 0; j < n; ++j) {
            const double s = c.scale(j);
            if (s <= 1.0) continue;
            double ds = 0.0;
            for (Eigen::Index i = 0; i < w; ++i) {
                const Eigen::Index k = j * w + i;
                ds += ga[k].real() * hn[k].real() + ga[k].imag() * hn[k].imag();
                ga[k] /= s;
            }
            ds = -ds / s;
            const Eigen::Index k = j * w + c.peak[static_cast<std::size_t>(j)];
            ga[k] += ds * hn[k];
        }
        const int hl = l - 1;
        const bool t = net.config().trains_bandwidth();
        const bool zt = net.config().trains_zeta();
        double gt = 0.0;
        double gz = 0.0;
        const Eigen::Index total = gh.size();
        for (Eigen::Index k = 0; k < total; ++k) {
            const Complex gk = ga[k];
            if (t) {
                const Complex d = c.d_bandwidth.data()[k];
                gt += gk.real() * d.real() + gk.imag() * d.imag();
            }
            if (zt) {
                const Complex d = c.d_zeta.data()[k];
                gz += gk.real() * d.real() + gk.imag() * d.imag();
            }
            ga[k] = mul(std::conj(c.d_input.data()[k]), gk);
        }
        const auto& cfg = net.config();
        if (t) {
            grad_act(hl, 0) = gt * bounded_param_slope(net.raw_activation_params()(hl, 0), cfg.bandwidth.lower,
                                                       cfg.bandwidth.upper);
        }
        if (zt) {
            const int col = t ? 1 : 0;
            grad_act(hl, col) =
                gz * bounded_param_slope(net.raw_activation_params()(hl, col), cfg.zeta.lower, cfg.zeta.upper);
        }
        g = std::move(gh);
    }

    out.gradient.resize(net.parameter_count());
    Eigen::Index k = 0;
    const bool real_only = !net.config().complex_weights;
    const auto put = [&](const Complex* data, Eigen::Index m) {
        for (Eigen::Index i = 0; i < m; ++i) {
            out.gradient(k++) = data[i].real();
            out.gradient(k++) = real_only ? 0.0 : data[i].imag();
        }
    };
    for (std::size_t l = 0; l < layers.size(); ++l) {
        put(grad_w[l].data(), grad_w[l].size());
        put(grad_b[l].data(), grad_b[l].size());
    }
    for (Eigen::Index r = 0; r < grad_act.rows(); ++r)
        for (Eigen::Index c = 0; c < grad_act.cols(); ++c) out.gradient(k++) = grad_act(r, c);
    return out;
}

std::uint64_t config_hash(const NetworkConfig& n, const TrainConfig& t) {
    std::string key = "depth=" + std::to_string(n.depth) + ";width=" + std::to_string(n.width) +
                      ";in=" + std::to_string(n.in_dim) + ";out=" + std::to_string(n.out_dim) +
                      ";act=" + n.activation.expression() + ";T=" + format17(n.bandwidth.lower) + "," +
                      format17(n.bandwidth.upper) + ";zeta=" + format17(n.zeta.lower) + "," +
                      format17(n.zeta.upper) + ";complex=" + std::to_string(n.complex_weights) +
                      ";init=" + std::to_string(static_cast<int>(n.init)) + ";seed=" + std::to_string(n.seed) +
                      ";epochs=" + std::to_string(t.epochs) + ";lr0=" + format17(t.lr0) +
                      ";decay=" + format17(t.decay) + ";tseed=" + std::to_string(t.seed);
    return fnv1a(key);
}

namespace {

void check_activation_bounds(const Network& net) {
    const auto& cfg = net.config();
    for (int l = 0; l < cfg.hidden_layers(); ++l) {
        if (cfg.trains_bandwidth()) {
            const double t = net.bandwidth(l);
            if (!(t > cfg.bandwidth.lower && t < cfg.bandwidth.upper))
                throw NumericalError("train: T of hidden layer " + std::to_string(l) + " reached its bound");
        }
        if (cfg.trains_zeta()) {
            const double z = net.zeta(l);
            if (!(z > cfg.zeta.lower && z < cfg.zeta.upper))
                throw NumericalError("train: zeta of hidden layer " + std::to_string(l) + " reached its bound");
        }
    }
}

double psnr_from_mse(double mse) { return mse == 0.0 ? INFINITY : -10.0 * std::log10(mse); }

}  // namespace

TrainRecord train(Network& net, const Eigen::MatrixXd& coords, const Eigen::MatrixXd& targets,
                  const TrainConfig& tcfg, const TrainOptions& options) {
    if (tcfg.epochs < 0) throw InvalidArgument("train: epochs must be non-negative");
    if (tcfg.log_every < 1) throw InvalidArgument("train: log_every must be at least 1");
    if (coords.rows() != targets.rows()) throw InvalidArgument("train: coordinate and target row counts differ");

    const auto start = std::chrono::steady_clock::now();
    const Eigen::VectorXd* mask = options.sample_mask;
    const Metric metric = options.metric ? options.metric : [&targets, mask](const Eigen::MatrixXd& pred) {
        return psnr_from_mse(masked_mse(pred, targets, mask));
    };

    TrainRecord record;
    record.seed = tcfg.seed;
    record.config_hash = config_hash(net.config(), tcfg);

    AdamState state(net.parameter_count(), AdamHyper{tcfg.lr0});
    Eigen::VectorXd params = net.parameters();
    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        LossGradient lg = loss_and_gradient(net, coords, targets, mask);
        if (!std::isfinite(lg.loss)) throw TrainingDiverged(epoch, record);
        if (epoch == 0) record.initial_loss = lg.loss;
        if (epoch % tcfg.log_every == 0 || epoch == tcfg.epochs - 1) {
            EpochLog log{epoch, lg.loss, metric(lg.output)};
            record.trajectory.push_back(log);
            if (options.on_log) options.on_log(log);
        }
        state.hyper.lr = lr_schedule(epoch, tcfg.epochs, tcfg.lr0, tcfg.decay);
        try {
            adam_step(state, params, lg.gradient);
        } catch (const NumericalError&) {
            throw TrainingDiverged(epoch, record);
        }
        net.set_parameters(params);
        check_activation_bounds(net);
    }

    const Eigen::MatrixXd final_output = forward(net, coords);
    record.final_loss = masked_mse(final_output, targets, mask);
    if (tcfg.epochs == 0) record.initial_loss = record.final_loss;
    record.final_metric = metric(final_output);
    record.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return record;
}

namespace {
constexpr const char* kCheckpointMagic = "cosmo-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void save_checkpoint(std::ostream& out, const Network& net) {
    const NetworkConfig& c = net.config();
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n'
        << "depth " << c.depth << '\n'
        << "width " << c.width << '\n'
        << "in_dim " << c.in_dim << '\n'
        << "out_dim " << c.out_dim << '\n'
        << "activation " << c.activation.expression() << '\n'
        << "bandwidth " << format17(c.bandwidth.lower) << ' ' << format17(c.bandwidth.upper) << '\n'
        << "zeta " << format17(c.zeta.lower) << ' ' << format17(c.zeta.upper) << '\n'
        << "complex_weights " << int(c.complex_weights) << '\n'
        << "init " << (c.init == WeightInit::Siren ? "siren" : "uniform") << '\n'
        << "seed " << c.seed << '\n';
    const Eigen::VectorXd p = net.parameters();
    out << "params " << p.size() << '\n';
    for (Eigen::Index i = 0; i < p.size(); ++i) out << format17(p(i)) << '\n';
    if (!out) throw InvalidArgument("save_checkpoint: write failed");
}

Network load_checkpoint(std::istream& in) {
    const auto fail = [](const std::string& what) -> void {
        throw InvalidArgument("load_checkpoint: " + what);
    };
    const auto field = [&](const char* key) {
        std::string k;
        if (!(in >> k) || k != key) fail(std::string("expected field '") + key + "'");
    };
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kCheckpointMagic) fail("not a checkpoint");
    if (version != kCheckpointVersion) fail("unsupported version " + std::to_string(version));
    NetworkConfig c;
    field("depth");
    in >> c.depth;
    field("width");
    in >> c.width;
    field("in_dim");
    in >> c.in_dim;
    field("out_dim");
    in >> c.out_dim;
    field("activation");
    std::string expr;
    in >> std::ws;
    std::getline(in, expr);
    c.activation = parse_activation(expr);
    const auto number = [&]() {
        std::string tok;
        in >> tok;
        try {
            return std::stod(tok);
        } catch (const std::exception&) {
            fail("malformed number '" + tok + "'");
        }
        return 0.0;
    };
    field("bandwidth");
    c.bandwidth.lower = number();
    c.bandwidth.upper = number();
    field("zeta");
    c.zeta.lower = number();
    c.zeta.upper = number();
    field("complex_weights");
    int cw = 1;
    in >> cw;
    c.complex_weights = cw != 0;
    field("init");
    std::string init;
    in >> init;
    if (init != "uniform" && init != "siren") fail("unknown init '" + init + "'");
    c.init = init == "siren" ? WeightInit::Siren : WeightInit::Uniform;
    field("seed");
    in >> c.seed;
    field("params");
    Eigen::Index count = 0;
    in >> count;
    if (!in) fail("truncated header");
    Network net(c);
    if (count != net.parameter_count()) fail("parameter count does not match the configuration");
    Eigen::VectorXd p(count);
    for (Eigen::Index i = 0; i < count; ++i) p(i) = number();
    if (!in) fail("truncated parameter list");
    net.set_parameters(p);
    return net;
}

}  // namespace cosmo
