#include "cosmo/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cosmo/activations.hpp"
#include "cosmo/expression.hpp"
#include "cosmo/layer_spectrum.hpp"
#include "cosmo/network.hpp"
#include "cosmo/spectral.hpp"
#include "cosmo/tasks.hpp"

namespace cosmo::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr const char* kDefaultActivation = "cosmo(raised_cosine(T=5,beta=0.05),zeta=1.5)";

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// --- flags -----------------------------------------------------------------

struct NetFlags {
    std::string activation = kDefaultActivation;
    int width = 256;
    int depth = 5;
    std::string init = "uniform";
    bool real_weights = false;
    double t_min = 0.0;
    double t_max = 10.0;
    double zeta_min = 0.0;
    double zeta_max = 3.0;
};

struct TrainFlags {
    int epochs = 1000;
    double lr = 0.01;
    double decay = 0.01;
    int log_every = 1;
    std::uint64_t seed = 0;
};

struct OutFlags {
    std::string out;
    bool force = false;
};

struct ImageFlags {
    std::string image;
    std::string synthetic = "texture";
    int size = 64;
    std::uint64_t texture_seed = 0;
};

void add_net_flags(CLI::App* app, NetFlags& f) {
    app->add_option("--activation", f.activation, "Activation expression")->capture_default_str();
    app->add_option("--width", f.width, "Hidden width")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--depth", f.depth, "Linear layers (>= 2)")->capture_default_str()->check(CLI::Range(2, 64));
    app->add_option("--init", f.init, "Weight initialization")
        ->capture_default_str()
        ->check(CLI::IsMember({"uniform", "siren"}));
    app->add_flag("--real-weights", f.real_weights, "Keep weights and biases real");
    app->add_option("--t-min", f.t_min, "Lower bound of T")->capture_default_str();
    app->add_option("--t-max", f.t_max, "Upper bound of T")->capture_default_str();
    app->add_option("--zeta-min", f.zeta_min, "Lower bound of zeta")->capture_default_str();
    app->add_option("--zeta-max", f.zeta_max, "Upper bound of zeta")->capture_default_str();
}

void add_train_flags(CLI::App* app, TrainFlags& f) {
    app->add_option("--epochs", f.epochs, "Training epochs")->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--lr", f.lr, "Initial learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--decay", f.decay, "Total learning-rate decay")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--log-every", f.log_every, "Epochs between metric rows")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--seed", f.seed, "Master seed")->capture_default_str();
}

void add_out_flags(CLI::App* app, OutFlags& f) {
    app->add_option("--out", f.out, "Run directory (default $COSMO_OUT/<command> or runs/<command>)");
    app->add_flag("--force", f.force, "Write into an existing non-empty run directory");
}

void add_image_flags(CLI::App* app, ImageFlags& f) {
    app->add_option("--image", f.image, "Input P5/P6 pixmap");
    app->add_option("--synthetic", f.synthetic, "Built-in image when --image is absent")
        ->capture_default_str()
        ->check(CLI::IsMember({"texture", "chirp"}));
    app->add_option("--size", f.size, "Side of the built-in image")->capture_default_str()->check(CLI::Range(2, 4096));
    app->add_option("--texture-seed", f.texture_seed, "Seed of the built-in texture")->capture_default_str();
}

json net_json(const NetFlags& f) {
    return {{"activation", f.activation}, {"width", f.width},       {"depth", f.depth},
            {"init", f.init},             {"real_weights", f.real_weights},
            {"t_bounds", {f.t_min, f.t_max}}, {"zeta_bounds", {f.zeta_min, f.zeta_max}}};
}

json train_json(const TrainFlags& f) {
    return {{"epochs", f.epochs}, {"lr", f.lr}, {"decay", f.decay}, {"log_every", f.log_every}};
}

json image_json(const ImageFlags& f) {
    if (!f.image.empty()) return {{"image", f.image}};
    return {{"synthetic", f.synthetic}, {"size", f.size}, {"texture_seed", f.texture_seed}};
}

NetworkConfig make_network_config(const NetFlags& f, int in_dim, int out_dim, std::uint64_t seed) {
    NetworkConfig c;
    c.depth = f.depth;
    c.width = f.width;
    c.in_dim = in_dim;
    c.out_dim = out_dim;
    c.activation = parse_activation(f.activation);
    c.bandwidth = {f.t_min, f.t_max};
    c.zeta = {f.zeta_min, f.zeta_max};
    c.complex_weights = !f.real_weights;
    c.init = f.init == "siren" ? WeightInit::Siren : WeightInit::Uniform;
    c.seed = seed;
    c.validate();
    return c;
}

TrainConfig make_train_config(const TrainFlags& f) {
    TrainConfig t;
    t.epochs = f.epochs;
    t.lr0 = f.lr;
    t.decay = f.decay;
    t.seed = f.seed;
    t.log_every = f.log_every;
    return t;
}

ImageGrid load_image(const ImageFlags& f) {
    if (!f.image.empty()) {
        ImageGrid img = read_ppm(f.image);
        img.validate();
        return img;
    }
    if (f.synthetic == "chirp") return radial_chirp(f.size, f.size);
    return natural_texture(f.size, f.size, f.texture_seed);
}

// --- run directory -----------------------------------------------------------

class RunDir {
public:
    RunDir(const std::string& command, const OutFlags& flags) {
        if (!flags.out.empty()) {
            dir_ = flags.out;
        } else {
            const char* env = std::getenv("COSMO_OUT");
            dir_ = fs::path(env && *env ? env : "runs") / command;
        }
        if (fs::exists(dir_)) {
            if (!fs::is_directory(dir_)) throw InvalidArgument("output path " + dir_.string() + " is not a directory");
            if (!fs::is_empty(dir_) && !flags.force)
                throw InvalidArgument("output directory " + dir_.string() + " is not empty; pass --force to overwrite");
        }
        fs::create_directories(dir_);
    }

    const fs::path& dir() const noexcept { return dir_; }

    /// Registers an artifact and returns its path.
    fs::path file(const std::string& name) {
        if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
        return dir_ / name;
    }

    void write_summary(const std::string& command, std::uint64_t seed, const json& config, const json& metrics,
                       Clock::time_point start) {
        const fs::path path = file("summary.json");
        json doc;
        doc["command"] = command;
        doc["seed"] = seed;
        doc["config"] = config;
        doc["metrics"] = metrics;
        doc["files"] = files_;
        doc["wallclock_s"] = std::chrono::duration<double>(Clock::now() - start).count();
        std::ofstream out(path);
        out << doc.dump(2) << '\n';
        if (!out) throw InvalidArgument("cannot write " + path.string());
    }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    return out;
}

void write_metrics_csv(const fs::path& path, const TrainRecord& record, const char* metric_name) {
    std::ofstream out = open_out(path);
    out << "epoch,loss," << metric_name << '\n';
    for (const EpochLog& log : record.trajectory)
        out << log.epoch << ',' << format17(log.loss) << ',' << format17(log.metric) << '\n';
}

ImageGrid to_image(const Eigen::MatrixXd& values, int h, int w) {
    ImageGrid img(h, w, static_cast<int>(values.cols()));
    img.pixels = values;
    return img;
}

json layer_json(const Network& net) {
    json layers = json::array();
    const NetworkConfig& c = net.config();
    for (int l = 0; l < c.hidden_layers(); ++l) {
        json entry;
        if (c.trains_bandwidth()) entry["T"] = net.bandwidth(l);
        if (c.trains_zeta()) entry["zeta"] = net.zeta(l);
        layers.push_back(entry);
    }
    return layers;
}

struct FitOutcome {
    TrainRecord record;
    bool diverged = false;
    std::string message;
};

FitOutcome fit(Network& net, const Eigen::MatrixXd& coords, const Eigen::MatrixXd& targets, const TrainFlags& tf,
               const TrainOptions& options) {
    FitOutcome o;
    try {
        o.record = train(net, coords, targets, make_train_config(tf), options);
    } catch (const TrainingDiverged& e) {
        o.record = e.partial();
        o.diverged = true;
        o.message = e.what();
    } catch (const NumericalError& e) {
        o.diverged = true;
        o.message = e.what();
    }
    return o;
}

json training_metrics(const FitOutcome& o, const Network& net, const NetworkConfig& ncfg, const TrainFlags& tf) {
    json m;
    m["status"] = o.diverged ? "diverged" : "ok";
    if (o.diverged) m["error"] = o.message;
    m["epochs"] = tf.epochs;
    m["initial_loss"] = o.record.initial_loss;
    m["final_loss"] = o.record.final_loss;
    m["config_hash"] = hex(config_hash(ncfg, make_train_config(tf)));
    m["parameters"] = net.parameter_count();
    m["layers"] = layer_json(net);
    return m;
}

void save_model(RunDir& run, const Network& net) {
    std::ofstream out = open_out(run.file("model.ckpt"));
    save_checkpoint(out, net);
}

struct Common {
    std::vector<std::string> argv;
    Clock::time_point start;
    std::ostream* out;
    std::ostream* err;
};

json base_config(const Common& c, const NetFlags& nf, const TrainFlags& tf) {
    json cfg;
    cfg["argv"] = c.argv;
    cfg["network"] = net_json(nf);
    cfg["train"] = train_json(tf);
    return cfg;
}

int finish_diverged(RunDir& run, const std::string& command, std::uint64_t seed, const json& cfg, const json& metrics,
                    const FitOutcome& o, const Common& c) {
    *c.out << "training diverged: " << o.message << '\n';
    run.write_summary(command, seed, cfg, metrics, c.start);
    return kExitNumerical;
}

// --- image commands ----------------------------------------------------------

struct FitArgs {
    NetFlags net;
    TrainFlags train;
    OutFlags out;
    ImageFlags image;
};

int cmd_fit(const FitArgs& a, const Common& c) {
    const ImageGrid img = load_image(a.image);
    RunDir run("fit", a.out);
    const CoordinateGrid grid = build_grid({img.height, img.width});
    const NetworkConfig ncfg = make_network_config(a.net, 2, img.channels, a.train.seed);
    Network net(ncfg);
    const FitOutcome o = fit(net, grid.coords, img.pixels, a.train, {});
    write_metrics_csv(run.file("metrics.csv"), o.record, "psnr");

    json cfg = base_config(c, a.net, a.train);
    cfg["task"] = image_json(a.image);
    json m = training_metrics(o, net, ncfg, a.train);
    if (o.diverged) return finish_diverged(run, "fit", a.train.seed, cfg, m, o, c);

    const ImageGrid recon = to_image(forward(net, grid.coords), img.height, img.width);
    write_ppm(run.file("recon.ppm"), recon);
    save_model(run, net);
    m["psnr"] = psnr(recon, img);
    m["mse"] = mse(recon, img);
    if (img.height >= 11 && img.width >= 11) m["ssim"] = ssim(recon, img);
    run.write_summary("fit", a.train.seed, cfg, m, c.start);
    *c.out << "fit: psnr " << m["psnr"].get<double>() << " dB -> " << run.dir().string() << '\n';
    return kExitOk;
}

struct DenoiseArgs : FitArgs {
    double photons = 30.0;
    double readout = 2.0;
};

int cmd_denoise(const DenoiseArgs& a, const Common& c) {
    const ImageGrid clean = load_image(a.image);
    RunDir run("denoise", a.out);
    const ImageGrid noisy = photon_noise(clean, a.photons, a.readout, derive_seed(a.train.seed, "noise"));
    write_ppm(run.file("noisy.ppm"), noisy);
    const CoordinateGrid grid = build_grid({clean.height, clean.width});
    const NetworkConfig ncfg = make_network_config(a.net, 2, clean.channels, a.train.seed);
    Network net(ncfg);
    TrainOptions opts;
    opts.metric = [&clean](const Eigen::MatrixXd& pred) { return psnr_from_mse(masked_mse(pred, clean.pixels)); };
    // The readout counts have a known mean; remove it from the training target.
    const Eigen::MatrixXd target = (noisy.pixels.array() - a.readout / a.photons).matrix();
    const FitOutcome o = fit(net, grid.coords, target, a.train, opts);
    write_metrics_csv(run.file("metrics.csv"), o.record, "psnr");

    json cfg = base_config(c, a.net, a.train);
    cfg["task"] = image_json(a.image);
    cfg["task"]["photons"] = a.photons;
    cfg["task"]["readout"] = a.readout;
    json m = training_metrics(o, net, ncfg, a.train);
    m["psnr_noisy"] = psnr(noisy, clean);
    if (o.diverged) return finish_diverged(run, "denoise", a.train.seed, cfg, m, o, c);

    const ImageGrid recon = to_image(forward(net, grid.coords), clean.height, clean.width);
    write_ppm(run.file("recon.ppm"), recon);
    save_model(run, net);
    m["psnr_recon"] = psnr(recon, clean);
    if (clean.height >= 11 && clean.width >= 11) {
        m["ssim_noisy"] = ssim(noisy, clean);
        m["ssim_recon"] = ssim(recon, clean);
    }
    run.write_summary("denoise", a.train.seed, cfg, m, c.start);
    *c.out << "denoise: noisy " << m["psnr_noisy"].get<double>() << " dB, recon " << m["psnr_recon"].get<double>()
           << " dB -> " << run.dir().string() << '\n';
    return kExitOk;
}

struct SuperresArgs : FitArgs {
    int factor = 4;
    bool allow_any = false;
};

int cmd_superres(const SuperresArgs& a, const Common& c) {
    if (a.factor < 1) throw InvalidArgument("--factor must be positive");
    if (!a.allow_any && a.factor != 2 && a.factor != 4 && a.factor != 6)
        throw InvalidArgument("--factor must be 2, 4 or 6 (pass --allow-any for other values)");
    const ImageGrid full = crop_to_multiple(load_image(a.image), a.factor);
    RunDir run("superres", a.out);
    const ImageGrid low = downsample(full, a.factor);
    const ImageGrid nearest = upsample_nearest(low, a.factor);
    write_ppm(run.file("lowres.ppm"), low);
    write_ppm(run.file("nearest.ppm"), nearest);

    const CoordinateGrid train_grid = block_center_grid(full.height, full.width, a.factor);
    const CoordinateGrid eval_grid = build_grid({full.height, full.width});
    const NetworkConfig ncfg = make_network_config(a.net, 2, full.channels, a.train.seed);
    Network net(ncfg);
    TrainOptions opts;
    opts.metric = [&](const Eigen::MatrixXd&) {
        return psnr_from_mse(masked_mse(forward(net, eval_grid.coords), full.pixels));
    };
    const FitOutcome o = fit(net, train_grid.coords, low.pixels, a.train, opts);
    write_metrics_csv(run.file("metrics.csv"), o.record, "psnr");

    json cfg = base_config(c, a.net, a.train);
    cfg["task"] = image_json(a.image);
    cfg["task"]["factor"] = a.factor;
    json m = training_metrics(o, net, ncfg, a.train);
    m["psnr_nearest"] = psnr(nearest, full);
    if (full.height >= 11 && full.width >= 11) m["ssim_nearest"] = ssim(nearest, full);
    if (o.diverged) return finish_diverged(run, "superres", a.train.seed, cfg, m, o, c);

    const ImageGrid recon = to_image(forward(net, eval_grid.coords), full.height, full.width);
    write_ppm(run.file("recon.ppm"), recon);
    save_model(run, net);
    m["psnr"] = psnr(recon, full);
    if (full.height >= 11 && full.width >= 11) m["ssim"] = ssim(recon, full);
    run.write_summary("superres", a.train.seed, cfg, m, c.start);
    *c.out << "superres x" << a.factor << ": psnr " << m["psnr"].get<double>() << " dB (nearest "
           << m["psnr_nearest"].get<double>() << " dB) -> " << run.dir().string() << '\n';
    return kExitOk;
}

struct InpaintArgs : FitArgs {
    double fraction = 0.2;
};

int cmd_inpaint(const InpaintArgs& a, const Common& c) {
    const ImageGrid img = load_image(a.image);
    RunDir run("inpaint", a.out);
    const Eigen::VectorXd mask = sample_mask(img.height, img.width, a.fraction, a.train.seed);
    ImageGrid masked = img;
    for (Eigen::Index i = 0; i < mask.size(); ++i)
        if (mask(i) == 0.0) masked.pixels.row(i).setZero();
    write_ppm(run.file("masked.ppm"), masked);

    const CoordinateGrid grid = build_grid({img.height, img.width});
    const NetworkConfig ncfg = make_network_config(a.net, 2, img.channels, a.train.seed);
    Network net(ncfg);
    TrainOptions opts;
    opts.sample_mask = &mask;
    opts.metric = [&img](const Eigen::MatrixXd& pred) { return psnr_from_mse(masked_mse(pred, img.pixels)); };
    const FitOutcome o = fit(net, grid.coords, img.pixels, a.train, opts);
    write_metrics_csv(run.file("metrics.csv"), o.record, "psnr");

    json cfg = base_config(c, a.net, a.train);
    cfg["task"] = image_json(a.image);
    cfg["task"]["fraction"] = a.fraction;
    json m = training_metrics(o, net, ncfg, a.train);
    m["observed"] = mask.sum();
    m["psnr_masked"] = psnr(masked, img);
    if (o.diverged) return finish_diverged(run, "inpaint", a.train.seed, cfg, m, o, c);

    const ImageGrid recon = to_image(forward(net, grid.coords), img.height, img.width);
    write_ppm(run.file("recon.ppm"), recon);
    save_model(run, net);
    m["psnr"] = psnr(recon, img);
    if (img.height >= 11 && img.width >= 11) m["ssim"] = ssim(recon, img);
    run.write_summary("inpaint", a.train.seed, cfg, m, c.start);
    *c.out << "inpaint: psnr " << m["psnr"].get<double>() << " dB -> " << run.dir().string() << '\n';
    return kExitOk;
}

// --- occupancy -----------------------------------------------------------------

struct OccupancyArgs {
    NetFlags net;
    TrainFlags train;
    OutFlags out;
    std::string shape = "sphere";
    std::string volume;
    int resolution = 32;
    ShapeParams params;
};

int cmd_occupancy(const OccupancyArgs& a, const Common& c) {
    VolumeGrid gt;
    if (!a.volume.empty()) {
        gt = read_volume(a.volume);
        gt.validate();
    } else {
        gt = synthetic_occupancy(parse_shape(a.shape), a.resolution, a.params);
    }
    RunDir run("occupancy", a.out);
    write_volume(run.file("gt.vol"), gt);
    const CoordinateGrid grid = voxel_centers(gt.resolution);
    const NetworkConfig ncfg = make_network_config(a.net, 3, 1, a.train.seed);
    Network net(ncfg);
    const auto as_volume = [&gt](const Eigen::MatrixXd& pred) {
        VolumeGrid v(gt.resolution);
        v.values = pred.col(0);
        return v;
    };
    TrainOptions opts;
    opts.metric = [&](const Eigen::MatrixXd& pred) { return iou(as_volume(pred), gt); };
    const FitOutcome o = fit(net, grid.coords, gt.values, a.train, opts);
    write_metrics_csv(run.file("metrics.csv"), o.record, "iou");

    json cfg = base_config(c, a.net, a.train);
    if (!a.volume.empty()) {
        cfg["task"] = {{"volume", a.volume}};
    } else {
        cfg["task"] = {{"shape", a.shape},
                       {"resolution", a.resolution},
                       {"radius", a.params.radius},
                       {"major_radius", a.params.major_radius},
                       {"minor_radius", a.params.minor_radius}};
    }
    json m = training_metrics(o, net, ncfg, a.train);
    m["occupied_fraction"] = gt.values.mean();
    if (o.diverged) return finish_diverged(run, "occupancy", a.train.seed, cfg, m, o, c);

    VolumeGrid recon = as_volume(forward(net, grid.coords));
    m["iou"] = iou(recon, gt);
    recon.values = recon.values.cwiseMax(0.0).cwiseMin(1.0);
    write_volume(run.file("recon.vol"), recon);
    save_model(run, net);
    run.write_summary("occupancy", a.train.seed, cfg, m, c.start);
    *c.out << "occupancy: iou " << m["iou"].get<double>() << " -> " << run.dir().string() << '\n';
    return kExitOk;
}

// --- cheb ------------------------------------------------------------------------

struct ChebArgs {
    OutFlags out;
    std::string activation;
    int nodes = 512;
    int nmax = 50;
    std::string report = "none";
    double tol = 1e-10;
    std::optional<double> zeta;
    std::vector<std::string> compare;
};

int cmd_cheb(const ChebArgs& a, const Common& c) {
    if (a.nmax >= a.nodes) throw InvalidArgument("--nmax must be below --nodes");
    const ActivationSpec spec = parse_activation(a.activation);
    std::vector<ActivationSpec> specs{spec};
    for (const std::string& e : a.compare) specs.push_back(parse_activation(e));
    RunDir run("cheb", a.out);

    const ChebyshevExpansion exp = chebyshev_coeffs(spec, a.nodes, a.nmax);
    {
        std::ofstream f = open_out(run.file("coeffs.csv"));
        write_coeffs_csv(f, exp);
    }
    {
        std::ofstream f = open_out(run.file("decay.csv"));
        write_decay_csv(f, decay_profile(specs, a.nodes, a.nmax));
    }

    json m;
    if (a.report == "parity") {
        const ParityReport r = parity_vanishing_report(spec, a.nodes, a.nmax, a.tol);
        std::ofstream f = open_out(run.file("report.txt"));
        f << "activation: " << r.activation << '\n'
          << "report: parity\n"
          << "parity: " << parity_name(r.parity) << '\n'
          << "applicable: " << (r.applicable ? "yes" : "no") << '\n'
          << "tolerance: " << format17(a.tol) << '\n'
          << "max_vanishing: " << format17(r.max_vanishing) << '\n'
          << "violations: " << r.violations.size() << '\n';
        for (int n : r.violations) f << "violation n=" << n << " |c_n|=" << format17(std::abs(r.expansion.coeffs(n))) << '\n';
        m["parity"] = std::string(parity_name(r.parity));
        m["applicable"] = r.applicable;
        m["max_vanishing"] = r.max_vanishing;
        m["violations"] = r.violations.size();
    } else if (a.report == "coverage") {
        ActivationSpec base = spec;
        double zeta = 0.0;
        if (spec.modulated()) {
            base = spec.base();
            zeta = spec.zeta();
        }
        if (a.zeta) zeta = *a.zeta;
        if (zeta == 0.0) throw InvalidArgument("coverage report needs a modulated activation or --zeta");
        const CoverageReport r = modulation_coverage_report(base, zeta, a.nodes, a.nmax, a.tol);
        std::ofstream f = open_out(run.file("report.txt"));
        f << "activation: " << r.base << '\n'
          << "report: coverage\n"
          << "zeta: " << format17(r.zeta) << '\n'
          << "base_parity: " << parity_name(r.base_parity) << '\n'
          << "tolerance: " << format17(a.tol) << '\n'
          << "max_predicted_zero: " << format17(r.max_predicted_zero) << '\n'
          << "violations: " << r.flagged.size() << '\n'
          << "n,unmodulated,a,b,flagged\n";
        double min_cov = std::numeric_limits<double>::infinity();
        for (const CoverageEntry& e : r.entries) {
            f << e.n << ',' << format17(e.unmodulated) << ',' << format17(e.a) << ',' << format17(e.b) << ','
              << int(e.flagged) << '\n';
            min_cov = std::min(min_cov, std::max(e.a, e.b));
        }
        m["zeta"] = r.zeta;
        m["base_parity"] = std::string(parity_name(r.base_parity));
        m["max_predicted_zero"] = r.max_predicted_zero;
        m["min_coverage"] = min_cov;
        m["flagged"] = r.flagged;
        m["violations"] = r.flagged.size();
    }
    m["n_max"] = a.nmax;
    m["nodes"] = a.nodes;

    json cfg;
    cfg["argv"] = c.argv;
    cfg["activation"] = spec.expression();
    cfg["compare"] = a.compare;
    cfg["report"] = a.report;
    cfg["tol"] = a.tol;
    run.write_summary("cheb", 0, cfg, m, c.start);
    *c.out << "cheb: " << spec.expression();
    if (m.contains("violations")) *c.out << ", violations " << m["violations"].get<std::size_t>();
    *c.out << " -> " << run.dir().string() << '\n';
    return kExitOk;
}

// --- spectrum ----------------------------------------------------------------------

struct SpectrumArgs {
    NetFlags net;
    TrainFlags train;
    OutFlags out;
    ImageFlags image;
    std::string mode = "blueshift";
    int order = 2;
    int harmonic = 1;
    std::vector<double> alpha;
    int high_bin = -1;
};

int cmd_spectrum(const SpectrumArgs& a, const Common& c) {
    if (a.mode == "blueshift") {
        if (a.harmonic < 1) throw InvalidArgument("--harmonic must be positive");
        RunDir run("spectrum", a.out);
        PolySpectrum ps;
        if (!a.alpha.empty()) {
            ps.alpha = Eigen::Map<const Eigen::VectorXd>(a.alpha.data(), Eigen::Index(a.alpha.size()));
        } else {
            if (a.order < 0) throw InvalidArgument("--order must be non-negative");
            ps.alpha = Eigen::VectorXd::Zero(a.order + 1);
            ps.alpha(a.order) = 1.0;
        }
        ps.input = CenteredSpectrum::zeros(a.harmonic);
        ps.input.values(0) = 0.5;
        ps.input.values(2 * a.harmonic) = 0.5;
        const CenteredSpectrum outspec = post_activation_spectrum(ps);
        std::ofstream f = open_out(run.file("spectrum.csv"));
        f << "k,re,im,magnitude\n";
        json support = json::array();
        for (int k = -outspec.half_width(); k <= outspec.half_width(); ++k) {
            const Complex v = outspec.at(k);
            f << k << ',' << format17(v.real()) << ',' << format17(v.imag()) << ',' << format17(std::abs(v)) << '\n';
            if (std::abs(v) > 1e-12) support.push_back(k);
        }
        json cfg;
        cfg["argv"] = c.argv;
        cfg["mode"] = a.mode;
        cfg["alpha"] = std::vector<double>(ps.alpha.data(), ps.alpha.data() + ps.alpha.size());
        cfg["harmonic"] = a.harmonic;
        json m;
        m["support"] = support;
        m["half_width"] = outspec.half_width();
        run.write_summary("spectrum", 0, cfg, m, c.start);
        *c.out << "spectrum: support size " << support.size() << " -> " << run.dir().string() << '\n';
        return kExitOk;
    }

    const ImageFlags& image = a.image;
    const ImageGrid img = load_image(image);
    RunDir run("spectrum", a.out);
    const CoordinateGrid grid = build_grid({img.height, img.width});
    const NetworkConfig ncfg = make_network_config(a.net, 2, img.channels, a.train.seed);
    Network net(ncfg);
    const FitOutcome o = fit(net, grid.coords, img.pixels, a.train, {});
    write_metrics_csv(run.file("metrics.csv"), o.record, "psnr");
    json cfg = base_config(c, a.net, a.train);
    cfg["mode"] = a.mode;
    cfg["task"] = image_json(image);
    json m = training_metrics(o, net, ncfg, a.train);
    if (o.diverged) return finish_diverged(run, "spectrum", a.train.seed, cfg, m, o, c);

    const std::vector<LayerSpectrum> spectra = layer_spectra(net, grid);
    const int high = a.high_bin >= 0 ? a.high_bin : img.width / 4;
    std::ofstream f = open_out(run.file("layer_spectra.csv"));
    f << "layer,bin,magnitude\n";
    json bands = json::array();
    double residual = 0.0;
    for (const LayerSpectrum& ls : spectra) {
        for (Eigen::Index k = 0; k < ls.profile.size(); ++k)
            f << ls.layer << ',' << k << ',' << format17(ls.profile(k)) << '\n';
        bands.push_back(band_mean(ls.profile, high));
        residual = std::max(residual, ls.parseval_residual);
    }
    m["psnr"] = psnr(to_image(forward(net, grid.coords), img.height, img.width), img);
    m["high_bin"] = high;
    m["high_band_mean"] = bands;
    m["parseval_residual"] = residual;
    run.write_summary("spectrum", a.train.seed, cfg, m, c.start);
    *c.out << "spectrum: " << spectra.size() << " layers -> " << run.dir().string() << '\n';
    return kExitOk;
}

// --- sweep -------------------------------------------------------------------------

struct SweepArgs {
    NetFlags net;
    TrainFlags train;
    OutFlags out;
    ImageFlags image;
    std::vector<int> widths;
    std::vector<int> depths;
    std::vector<double> lrs;
    int jobs = 1;
};

struct Cell {
    int width = 0;
    int depth = 0;
    double lr = 0.0;
    double psnr = std::numeric_limits<double>::quiet_NaN();
    std::string status = "pending";
};

int cmd_sweep(const SweepArgs& a, const Common& c) {
    if (a.widths.empty() || a.depths.empty()) throw InvalidArgument("sweep needs --widths and --depths");
    const std::vector<double> lrs = a.lrs.empty() ? std::vector<double>{a.train.lr} : a.lrs;
    const ImageGrid img = load_image(a.image);
    RunDir run("sweep", a.out);
    const CoordinateGrid grid = build_grid({img.height, img.width});

    std::vector<Cell> cells;
    for (int w : a.widths)
        for (int d : a.depths)
            for (double lr : lrs) cells.push_back({w, d, lr});
    std::sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) {
        return std::tie(x.width, x.depth, x.lr) < std::tie(y.width, y.depth, y.lr);
    });

    std::vector<std::string> cell_files(cells.size());
    const auto run_cell = [&](std::size_t i) {
        Cell& cell = cells[i];
        const std::string name =
            "cells/w" + std::to_string(cell.width) + "_d" + std::to_string(cell.depth) + "_lr" + shortest(cell.lr);
        try {
            NetFlags nf = a.net;
            nf.width = cell.width;
            nf.depth = cell.depth;
            TrainFlags tf = a.train;
            tf.lr = cell.lr;
            Network net(make_network_config(nf, 2, img.channels, tf.seed));
            const FitOutcome o = fit(net, grid.coords, img.pixels, tf, {});
            fs::create_directories(run.dir() / name);
            write_metrics_csv(run.dir() / name / "metrics.csv", o.record, "psnr");
            cell_files[i] = name + "/metrics.csv";
            if (o.diverged) {
                cell.status = "diverged";
            } else {
                cell.psnr = o.record.final_metric;
                cell.status = "ok";
            }
        } catch (const std::exception& e) {
            cell.status = "error";
        }
    };

    const int jobs = std::max(1, std::min<int>(a.jobs, static_cast<int>(cells.size())));
    if (jobs == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
            });
        for (auto& t : pool) t.join();
    }

    std::ofstream f = open_out(run.file("sweep.csv"));
    f << "width,depth,lr,psnr,epochs,status\n";
    json rows = json::array();
    int ok = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const Cell& cell = cells[i];
        f << cell.width << ',' << cell.depth << ',' << shortest(cell.lr) << ','
          << (cell.status == "ok" ? format17(cell.psnr) : std::string("nan")) << ',' << a.train.epochs << ','
          << cell.status << '\n';
        if (!cell_files[i].empty()) run.file(cell_files[i]);
        ok += cell.status == "ok";
        json row = {{"width", cell.width}, {"depth", cell.depth}, {"lr", cell.lr}, {"status", cell.status}};
        if (cell.status == "ok") row["psnr"] = cell.psnr;
        rows.push_back(row);
    }
    f.close();

    json cfg = base_config(c, a.net, a.train);
    cfg["task"] = image_json(a.image);
    cfg["widths"] = a.widths;
    cfg["depths"] = a.depths;
    cfg["lrs"] = lrs;
    json m;
    m["cells"] = rows;
    m["succeeded"] = ok;
    run.write_summary("sweep", a.train.seed, cfg, m, c.start);
    *c.out << "sweep: " << ok << "/" << cells.size() << " cells succeeded -> " << run.dir().string() << '\n';
    return ok == 0 ? kExitNumerical : kExitOk;
}

// --- rerun ---------------------------------------------------------------------------

struct RerunArgs {
    std::string summary;
    OutFlags out;
};

bool same_bytes(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary);
    std::ifstream fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return sa == sb;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_rerun(const RerunArgs& a, const Common& c) {
    std::ifstream in(a.summary);
    if (!in) throw InvalidArgument("cannot read " + a.summary);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw InvalidArgument("malformed summary " + a.summary + ": " + e.what());
    }
    if (!doc.contains("config") || !doc["config"].contains("argv"))
        throw InvalidArgument("summary " + a.summary + " does not record its command line");
    const auto recorded = doc["config"]["argv"].get<std::vector<std::string>>();
    const fs::path original = fs::path(a.summary).parent_path();
    const fs::path target = a.out.out.empty() ? original / "rerun" : fs::path(a.out.out);

    std::vector<std::string> args;
    for (std::size_t i = 0; i < recorded.size(); ++i) {
        const std::string& s = recorded[i];
        if (s == "--force") continue;
        if (s == "--out") {
            ++i;
            continue;
        }
        if (s.rfind("--out=", 0) == 0) continue;
        args.push_back(s);
    }
    args.push_back("--out");
    args.push_back(target.string());
    if (a.out.force) args.push_back("--force");

    const int code = dispatch(args, *c.out, *c.err);
    if (code != kExitOk) return code;
    bool identical = true;
    for (const auto& name : doc["files"]) {
        const std::string file = name.get<std::string>();
        if (file.size() < 4 || file.substr(file.size() - 4) != ".csv") continue;
        const bool same = same_bytes(original / file, target / file);
        *c.out << (same ? "identical: " : "DIFFERS: ") << file << '\n';
        identical = identical && same;
    }
    return identical ? kExitOk : kExitNumerical;
}

// --- dispatch --------------------------------------------------------------------------

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Coordinate networks with complex sinusoidally modulated activations"};
    app.name("cosmo");
    app.require_subcommand(1);

    Common common{args, Clock::now(), &out, &err};

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Fit an image");
    add_net_flags(fit_cmd, fit_args.net);
    add_train_flags(fit_cmd, fit_args.train);
    add_out_flags(fit_cmd, fit_args.out);
    add_image_flags(fit_cmd, fit_args.image);

    DenoiseArgs den;
    auto* den_cmd = app.add_subcommand("denoise", "Fit a photon-noise corrupted image");
    add_net_flags(den_cmd, den.net);
    add_train_flags(den_cmd, den.train);
    add_out_flags(den_cmd, den.out);
    add_image_flags(den_cmd, den.image);
    den_cmd->add_option("--photons", den.photons, "Mean photon count")->capture_default_str()->check(CLI::PositiveNumber);
    den_cmd->add_option("--readout", den.readout, "Mean readout count")->capture_default_str()->check(CLI::NonNegativeNumber);

    SuperresArgs sr;
    auto* sr_cmd = app.add_subcommand("superres", "Fit a downsampled image, evaluate at full resolution");
    add_net_flags(sr_cmd, sr.net);
    add_train_flags(sr_cmd, sr.train);
    add_out_flags(sr_cmd, sr.out);
    add_image_flags(sr_cmd, sr.image);
    sr_cmd->add_option("--factor", sr.factor, "Downsampling factor (2, 4 or 6)")->capture_default_str();
    sr_cmd->add_flag("--allow-any", sr.allow_any, "Accept any positive factor");

    InpaintArgs inp;
    auto* inp_cmd = app.add_subcommand("inpaint", "Fit a random subset of pixels");
    add_net_flags(inp_cmd, inp.net);
    add_train_flags(inp_cmd, inp.train);
    add_out_flags(inp_cmd, inp.out);
    add_image_flags(inp_cmd, inp.image);
    inp_cmd->add_option("--fraction", inp.fraction, "Observed pixel fraction")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));

    OccupancyArgs occ;
    auto* occ_cmd = app.add_subcommand("occupancy", "Fit a 3-D occupancy volume");
    add_net_flags(occ_cmd, occ.net);
    add_train_flags(occ_cmd, occ.train);
    add_out_flags(occ_cmd, occ.out);
    occ_cmd->add_option("--shape", occ.shape, "Synthetic shape")
        ->capture_default_str()
        ->check(CLI::IsMember({"sphere", "torus"}));
    occ_cmd->add_option("--volume", occ.volume, "Raw volume file instead of a synthetic shape");
    occ_cmd->add_option("--resolution", occ.resolution, "Voxels per side")->capture_default_str();
    occ_cmd->add_option("--radius", occ.params.radius, "Sphere radius")->capture_default_str();
    occ_cmd->add_option("--major-radius", occ.params.major_radius, "Torus ring radius")->capture_default_str();
    occ_cmd->add_option("--minor-radius", occ.params.minor_radius, "Torus tube radius")->capture_default_str();

    ChebArgs cheb;
    auto* cheb_cmd = app.add_subcommand("cheb", "Chebyshev coefficients, parity and coverage reports");
    add_out_flags(cheb_cmd, cheb.out);
    cheb_cmd->add_option("--activation", cheb.activation, "Activation expression")->required();
    cheb_cmd->add_option("--nodes", cheb.nodes, "Chebyshev nodes")->capture_default_str()->check(CLI::PositiveNumber);
    cheb_cmd->add_option("--nmax", cheb.nmax, "Highest coefficient index")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cheb_cmd->add_option("--report", cheb.report, "Report kind")
        ->capture_default_str()
        ->check(CLI::IsMember({"none", "parity", "coverage"}));
    cheb_cmd->add_option("--tol", cheb.tol, "Vanishing tolerance")->capture_default_str();
    cheb_cmd->add_option("--zeta", cheb.zeta, "Modulation frequency for a coverage report of an unmodulated base");
    cheb_cmd->add_option("--compare", cheb.compare, "Further activations for decay.csv");

    SpectrumArgs spec;
    spec.image.synthetic = "chirp";
    auto* spec_cmd = app.add_subcommand("spectrum", "Blueshift model or per-layer spectra of a trained network");
    add_net_flags(spec_cmd, spec.net);
    add_train_flags(spec_cmd, spec.train);
    add_out_flags(spec_cmd, spec.out);
    add_image_flags(spec_cmd, spec.image);
    spec_cmd->add_option("--mode", spec.mode, "blueshift or layers")
        ->capture_default_str()
        ->check(CLI::IsMember({"blueshift", "layers"}));
    spec_cmd->add_option("--order", spec.order, "Monomial order K of the blueshift activation")->capture_default_str();
    spec_cmd->add_option("--alpha", spec.alpha, "Polynomial coefficients alpha_0,alpha_1,...")->delimiter(',');
    spec_cmd->add_option("--harmonic", spec.harmonic, "Frequency of the input cosine")->capture_default_str();
    spec_cmd->add_option("--high-bin", spec.high_bin, "First bin of the high band (default W/4)");

    SweepArgs sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "Width x depth x learning-rate grid");
    add_net_flags(sweep_cmd, sweep.net);
    add_train_flags(sweep_cmd, sweep.train);
    add_out_flags(sweep_cmd, sweep.out);
    add_image_flags(sweep_cmd, sweep.image);
    sweep_cmd->add_option("--widths", sweep.widths, "Comma-separated widths")->delimiter(',')->required();
    sweep_cmd->add_option("--depths", sweep.depths, "Comma-separated depths")->delimiter(',')->required();
    sweep_cmd->add_option("--lrs", sweep.lrs, "Comma-separated learning rates (default --lr)")->delimiter(',');
    sweep_cmd->add_option("--jobs", sweep.jobs, "Concurrent cells")->capture_default_str()->check(CLI::PositiveNumber);

    RerunArgs rerun;
    auto* rerun_cmd = app.add_subcommand("rerun", "Re-execute a recorded run and compare its CSV files");
    rerun_cmd->add_option("summary", rerun.summary, "summary.json of the original run")->required();
    add_out_flags(rerun_cmd, rerun.out);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (*fit_cmd) return cmd_fit(fit_args, common);
    if (*den_cmd) return cmd_denoise(den, common);
    if (*sr_cmd) return cmd_superres(sr, common);
    if (*inp_cmd) return cmd_inpaint(inp, common);
    if (*occ_cmd) return cmd_occupancy(occ, common);
    if (*cheb_cmd) return cmd_cheb(cheb, common);
    if (*spec_cmd) return cmd_spectrum(spec, common);
    if (*sweep_cmd) return cmd_sweep(sweep, common);
    if (*rerun_cmd) return cmd_rerun(rerun, common);
    return kExitUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(args, out, err);
    } catch (const ParseError& e) {
        err << "error: activation expression " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

}  // namespace cosmo::cli
