#include "sigflow/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sigflow/spectrum.hpp"
#include "sigflow/viz.hpp"

namespace sigflow::cli {

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': expected a number, got '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': expected a nonnegative integer, got '" +
                        value + "'");
    }
}

long long parse_i64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': expected an integer, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw DataError("config key '" + key + "': expected true/false, got '" + value + "'");
}

void apply_key(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "output_dir") c.output_dir = value;
    else if (key == "objective") {
        if (value == "ml") c.train.objective = Objective::MaxLikelihood;
        else if (value == "ot") c.train.objective = Objective::OptimalTransport;
        else throw DataError("config key 'objective': expected ml or ot, got '" + value + "'");
    } else if (key == "arch.n_stages") c.n_stages = static_cast<int>(parse_i64(key, value));
    else if (key == "arch.kernel_size") c.kernel_size = parse_u64(key, value);
    else if (key == "arch.init_seed") c.init_seed = parse_u64(key, value);
    else if (key == "train.learning_rate") c.train.learning_rate = parse_double(key, value);
    else if (key == "train.batch_size") c.train.batch_size = parse_u64(key, value);
    else if (key == "train.epochs") c.train.epochs = parse_u64(key, value);
    else if (key == "train.dequant_amplitude") c.train.dequant_amplitude = parse_double(key, value);
    else if (key == "train.seed") c.train.seed = parse_u64(key, value);
    else if (key == "train.checkpoint_every") c.train.checkpoint_every = parse_u64(key, value);
    else if (key == "ot.ratio") c.train.ot.ratio = parse_u64(key, value);
    else if (key == "ot.metric") {
        if (value == "euclidean") c.train.ot.metric = Metric::Euclidean;
        else if (value == "squared_euclidean") c.train.ot.metric = Metric::SquaredEuclidean;
        else throw DataError("config key 'ot.metric': expected euclidean or squared_euclidean");
    } else if (key == "ot.class_conditional") c.train.ot.class_conditional = parse_bool(key, value);
    else if (key == "ot.sinkhorn_epsilon") c.train.ot.sinkhorn_epsilon = parse_double(key, value);
    else if (key == "split.fraction") c.split_fraction = parse_double(key, value);
    else if (key == "split.seed") c.split_seed = parse_u64(key, value);
    else if (key == "synth.n_per_class") c.synth.n_per_class = parse_u64(key, value);
    else if (key == "synth.channels") c.synth.channels = parse_u64(key, value);
    else if (key == "synth.samples") c.synth.samples = parse_u64(key, value);
    else if (key == "synth.sample_rate_hz") c.synth.sample_rate_hz = parse_double(key, value);
    else if (key == "synth.alpha_hz") c.synth.alpha_hz = parse_double(key, value);
    else if (key == "synth.alpha_amplitude") c.synth.alpha_amplitude = parse_double(key, value);
    else if (key == "synth.suppression") c.synth.suppression = parse_double(key, value);
    else if (key == "synth.noise_std") c.synth.noise_std = parse_double(key, value);
    else if (key == "synth.seed") c.synth.seed = parse_u64(key, value);
    else throw DataError("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

void write_summary_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os << j.dump(2) << '\n';
    if (!os) throw DataError("write failure for " + path);
}

// Models trained through the CLI see virtual-channel-padded data, so pad a
// dataset only when that is what the model expects.
SignalDataset pad_for_model(SignalDataset d, const FlowModel& model) {
    if (d.channels() != model.channels && d.channels() % 2 == 1)
        return pad_virtual_channel(d);
    return d;
}

FlowModel build_for_dataset(const RunConfig& c, const SignalDataset& d) {
    ArchitectureConfig ac;
    ac.channels = d.channels();
    ac.samples = d.samples();
    ac.n_classes = d.n_classes() > 0
                       ? d.n_classes()
                       : static_cast<std::size_t>(
                             *std::max_element(d.labels.begin(), d.labels.end()) + 1);
    ac.n_stages = c.n_stages;
    ac.kernel_size = c.kernel_size;
    ac.init_seed = c.init_seed;
    return build_architecture(ac);
}

}  // namespace

RunConfig default_run_config() {
    RunConfig c;
    if (const char* dir = std::getenv("SIGFLOW_OUTPUT_DIR"); dir && *dir)
        c.output_dir = dir;
    return c;
}

void load_run_config(const std::string& path, RunConfig& config) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open config file " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected 'key = value'");
        apply_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void write_resolved_config(const RunConfig& c, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os.precision(17);
    os << "output_dir = " << c.output_dir << "\n";
    os << "objective = "
       << (c.train.objective == Objective::MaxLikelihood ? "ml" : "ot") << "\n";
    os << "arch.n_stages = " << c.n_stages << "\n";
    os << "arch.kernel_size = " << c.kernel_size << "\n";
    os << "arch.init_seed = " << c.init_seed << "\n";
    os << "train.learning_rate = " << c.train.learning_rate << "\n";
    os << "train.batch_size = " << c.train.batch_size << "\n";
    os << "train.epochs = " << c.train.epochs << "\n";
    os << "train.dequant_amplitude = " << c.train.dequant_amplitude << "\n";
    os << "train.seed = " << c.train.seed << "\n";
    os << "train.checkpoint_every = " << c.train.checkpoint_every << "\n";
    os << "ot.ratio = " << c.train.ot.ratio << "\n";
    os << "ot.metric = "
       << (c.train.ot.metric == Metric::Euclidean ? "euclidean" : "squared_euclidean")
       << "\n";
    os << "ot.class_conditional = " << (c.train.ot.class_conditional ? "true" : "false")
       << "\n";
    os << "ot.sinkhorn_epsilon = " << c.train.ot.sinkhorn_epsilon << "\n";
    os << "split.fraction = " << c.split_fraction << "\n";
    os << "split.seed = " << c.split_seed << "\n";
    os << "synth.n_per_class = " << c.synth.n_per_class << "\n";
    os << "synth.channels = " << c.synth.channels << "\n";
    os << "synth.samples = " << c.synth.samples << "\n";
    os << "synth.sample_rate_hz = " << c.synth.sample_rate_hz << "\n";
    os << "synth.alpha_hz = " << c.synth.alpha_hz << "\n";
    os << "synth.alpha_amplitude = " << c.synth.alpha_amplitude << "\n";
    os << "synth.suppression = " << c.synth.suppression << "\n";
    os << "synth.noise_std = " << c.synth.noise_std << "\n";
    os << "synth.seed = " << c.synth.seed << "\n";
    if (!os) throw DataError("write failure for " + path);
}

int cmd_synth(const RunConfig& config, const std::string& out_path) {
    SignalDataset d = synth_generate(config.synth);
    save_dataset(d, out_path);
    write_resolved_config(config, out_path + ".config");
    std::cout << "wrote " << d.n_trials() << " trials (" << d.channels() << " x "
              << d.samples() << ") to " << out_path << "\n";
    return 0;
}

int cmd_train(const RunConfig& config_in, const std::string& dataset_path) {
    RunConfig config = config_in;
    SignalDataset raw = load_dataset(dataset_path);
    SignalDataset d = pad_virtual_channel(raw);
    auto [train, valid] = split_train_valid(d, config.split_fraction, config.split_seed);

    FlowModel model = build_for_dataset(config, d);
    ensure_dir(config.output_dir);
    if (config.train.checkpoint_every > 0)
        config.train.checkpoint_prefix = join(config.output_dir, "checkpoint");

    TrainReport report = config.train.objective == Objective::MaxLikelihood
                             ? train_max_likelihood(model, train, valid, config.train)
                             : train_ot(model, train, valid, config.train);

    save_model(model, join(config.output_dir, "model.sgfl"));
    write_report_csv(report, join(config.output_dir, "report.csv"));
    write_report_jsonl(report, join(config.output_dir, "report.jsonl"));
    write_resolved_config(config, join(config.output_dir, "resolved.config"));
    if (!report.records.empty()) {
        const auto& last = report.records.back();
        std::cout << "epoch " << last.epoch << ": train_ll " << last.train_log_likelihood
                  << ", valid_ll " << last.valid_log_likelihood << ", valid_acc "
                  << last.valid_accuracy << "\n";
    }
    return 0;
}

int cmd_sample(const RunConfig& config, const std::string& model_path, int cls,
               std::size_t count, std::uint64_t seed, const std::string& out_path) {
    FlowModel model = load_model(model_path);
    if (cls < 0 || static_cast<std::size_t>(cls) >= model.n_classes())
        throw DataError("class " + std::to_string(cls) + " out of range [0, " +
                        std::to_string(model.n_classes()) + ")");
    std::vector<int> labels(count, cls);
    SignalDataset d = sample_signals(model, labels, seed, config.synth.sample_rate_hz);
    save_dataset(d, out_path);
    write_resolved_config(config, out_path + ".config");
    return 0;
}

int cmd_eval(const RunConfig& config, const std::string& model_path,
             const std::string& dataset_path, const std::string& summary_name) {
    FlowModel model = load_model(model_path);
    SignalDataset d = pad_for_model(load_dataset(dataset_path), model);
    ensure_dir(config.output_dir);

    const std::string csv_path = join(config.output_dir, summary_name + ".csv");
    std::ofstream os(csv_path);
    if (!os) throw DataError("cannot open " + csv_path + " for writing");
    os.precision(17);
    os << "index,true_label,predicted,correct";
    for (std::size_t y = 0; y < model.n_classes(); ++y) os << ",posterior_" << y;
    os << "\n";
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.n_trials(); ++i) {
        ClassifyResult r = classify(model, d.trial(i));
        const bool ok = r.label == d.labels[i];
        correct += ok ? 1 : 0;
        os << i << ',' << d.labels[i] << ',' << r.label << ',' << (ok ? 1 : 0);
        for (double p : r.posterior) os << ',' << p;
        os << "\n";
    }
    if (!os) throw DataError("write failure for " + csv_path);

    nlohmann::json summary{
        {"dataset", dataset_path},
        {"n_trials", d.n_trials()},
        {"accuracy",
         d.n_trials() ? static_cast<double>(correct) / static_cast<double>(d.n_trials())
                      : 0.0},
        {"mean_log_likelihood", d.n_trials() ? mean_log_likelihood(model, d) : 0.0}};
    write_summary_json(summary, join(config.output_dir, summary_name + ".json"));
    write_resolved_config(config, join(config.output_dir, summary_name + ".config"));
    std::cout << "accuracy " << summary["accuracy"] << " on " << d.n_trials()
              << " trials\n";
    return 0;
}

int cmd_spectra(const RunConfig& config, const std::string& model_path,
                const std::string& dataset_path) {
    FlowModel model = load_model(model_path);
    SignalDataset real = pad_for_model(load_dataset(dataset_path), model);
    ensure_dir(config.output_dir);
    const std::string csv_path = join(config.output_dir, "spectra.csv");
    std::ofstream os(csv_path);
    if (!os) throw DataError("cannot open " + csv_path + " for writing");
    os.precision(17);
    os << "channel,freq_hz,real_power,generated_power\n";

    nlohmann::json summary;
    if (real.n_trials() > 0) {
        SignalDataset gen =
            sample_signals(model, real.labels, config.train.seed, real.sample_rate_hz);
        const std::size_t segment = std::min<std::size_t>(
            real.samples(), static_cast<std::size_t>(std::lround(real.sample_rate_hz)));
        std::vector<double> band_errors;
        for (std::size_t c = 0; c < real.channels(); ++c) {
            Spectrum sr = mean_spectrum(real.data, c, real.sample_rate_hz, segment);
            Spectrum sg = mean_spectrum(gen.data, c, real.sample_rate_hz, segment);
            std::vector<double> channel_errors;
            for (std::size_t k = 0; k < sr.freqs_hz.size(); ++k) {
                os << c << ',' << sr.freqs_hz[k] << ',' << sr.power[k] << ','
                   << sg.power[k] << "\n";
                if (sr.freqs_hz[k] >= 5.0 && sr.freqs_hz[k] <= 15.0 &&
                    sr.power[k] > 0.0 && sg.power[k] > 0.0)
                    channel_errors.push_back(
                        std::abs(std::log10(sg.power[k] / sr.power[k])));
            }
            if (!channel_errors.empty()) {
                std::sort(channel_errors.begin(), channel_errors.end());
                band_errors.push_back(channel_errors[channel_errors.size() / 2]);
            }
        }
        summary["median_band_log10_error_per_channel"] = band_errors;
        if (!band_errors.empty()) {
            std::vector<double> sorted = band_errors;
            std::sort(sorted.begin(), sorted.end());
            summary["median_band_log10_error"] = sorted[sorted.size() / 2];
        }
    }
    if (!os) throw DataError("write failure for " + csv_path);
    summary["n_trials"] = real.n_trials();
    write_summary_json(summary, join(config.output_dir, "spectra_summary.json"));
    write_resolved_config(config, join(config.output_dir, "spectra.config"));
    return 0;
}

int cmd_prototype(const RunConfig& config, const std::string& model_path) {
    FlowModel model = load_model(model_path);
    ensure_dir(config.output_dir);
    const std::string csv_path = join(config.output_dir, "prototypes.csv");
    std::ofstream os(csv_path);
    if (!os) throw DataError("cannot open " + csv_path + " for writing");
    os.precision(17);
    os << "class,channel,time_index,value\n";
    for (std::size_t y = 0; y < model.n_classes(); ++y) {
        Tensor proto = prototype_invert(model, y);
        for (std::size_t c = 0; c < model.channels; ++c)
            for (std::size_t t = 0; t < model.samples; ++t)
                os << y << ',' << c << ',' << t << ',' << proto(c, t) << "\n";
    }
    if (!os) throw DataError("write failure for " + csv_path);
    write_resolved_config(config, join(config.output_dir, "prototypes.config"));
    return 0;
}

int cmd_sweep(const RunConfig& config, const std::string& model_path, int cls,
              std::size_t dim, const std::vector<double>& values) {
    FlowModel model = load_model(model_path);
    if (cls < 0) throw DataError("class must be nonnegative");
    if (values.empty()) throw DataError("sweep needs at least one value");
    ensure_dir(config.output_dir);
    auto signals = dimension_sweep(model, static_cast<std::size_t>(cls), dim, values);
    const std::string csv_path = join(config.output_dir, "sweep.csv");
    std::ofstream os(csv_path);
    if (!os) throw DataError("cannot open " + csv_path + " for writing");
    os.precision(17);
    os << "swept_value,channel,time_index,value\n";
    for (std::size_t k = 0; k < values.size(); ++k)
        for (std::size_t c = 0; c < model.channels; ++c)
            for (std::size_t t = 0; t < model.samples; ++t)
                os << values[k] << ',' << c << ',' << t << ',' << signals[k](c, t)
                   << "\n";
    if (!os) throw DataError("write failure for " + csv_path);
    write_resolved_config(config, join(config.output_dir, "sweep.config"));
    return 0;
}

int cmd_match(const RunConfig& config, const std::string& model_path,
              const std::string& dataset_path, std::size_t ratio, std::uint64_t seed) {
    FlowModel model = load_model(model_path);
    SignalDataset d = pad_for_model(load_dataset(dataset_path), model);
    ensure_dir(config.output_dir);
    MatchResult res = match_generated_real(model, d, ratio, seed, config.train.ot.metric,
                                           config.train.ot.sinkhorn_epsilon);
    const std::string csv_path = join(config.output_dir, "match.csv");
    std::ofstream os(csv_path);
    if (!os) throw DataError("cannot open " + csv_path + " for writing");
    os.precision(17);
    os << "real_index,generated_index,mass,distance\n";
    for (const auto& e : res.entries)
        os << e.real_index << ',' << e.generated_index << ',' << e.mass << ','
           << e.distance << "\n";
    if (!os) throw DataError("write failure for " + csv_path);
    save_dataset(res.generated, join(config.output_dir, "match_generated.sgds"));
    write_summary_json(
        nlohmann::json{{"mean_matched_distance", res.mean_matched_distance},
                       {"n_real", d.n_trials()},
                       {"n_generated", res.generated.n_trials()}},
        join(config.output_dir, "match_summary.json"));
    write_resolved_config(config, join(config.output_dir, "match.config"));
    return 0;
}

namespace {

FlowModel selfcheck_model(std::uint64_t seed, std::size_t C, std::size_t T,
                          int stages) {
    ArchitectureConfig ac;
    ac.channels = C;
    ac.samples = T;
    ac.n_stages = stages;
    ac.init_seed = seed;
    FlowModel m = build_architecture(ac);
    Rng rng(seed + 1);
    for (auto& p : m.parameters()) {
        if (p.name.rfind("prior.", 0) == 0) continue;
        for (std::size_t i = 0; i < p.tensor->size(); ++i)
            (*p.tensor)[i] += rng.uniform(-0.2, 0.2);
    }
    return m;
}

}  // namespace

int cmd_selfcheck() {
    struct Check {
        std::string name;
        bool ok;
    };
    std::vector<Check> checks;

    {  // flow round trip and volume preservation
        FlowModel m = selfcheck_model(11, 2, 32, 2);
        Rng rng(1);
        bool ok = true;
        for (int trial = 0; trial < 20 && ok; ++trial) {
            Tensor x({2, 32});
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-2.0, 2.0);
            FlowOutput out = flow_forward(m, x);
            ok = out.log_det_jacobian == 0.0 &&
                 max_abs_diff(flow_inverse(m, out.latent).reshaped({2, 32}), x) < 1e-8;
        }
        checks.push_back({"flow round trip + zero log-det", ok});
    }
    {  // density normalization at d = 2 by trapezoid quadrature
        FlowModel m = selfcheck_model(7, 1, 2, 0);
        const int grid = 200;
        const double lim = 8.0, step = 2.0 * lim / grid;
        double mass = 0.0;
        for (int a = 0; a <= grid; ++a) {
            const double wa = (a == 0 || a == grid) ? 0.5 : 1.0;
            for (int b = 0; b <= grid; ++b) {
                const double wb = (b == 0 || b == grid) ? 0.5 : 1.0;
                Tensor x({1, 2}, {-lim + a * step, -lim + b * step});
                mass += wa * wb *
                        std::exp(m.prior.log_prob_marginal(flow_forward(m, x).latent));
            }
        }
        mass *= step * step;
        checks.push_back({"density normalization (d=2)", std::abs(mass - 1.0) < 0.02});
    }
    {  // gradient vs central finite differences through the full loss
        FlowModel m = selfcheck_model(3, 2, 8, 1);
        Tensor batch({2, 2, 8});
        Rng rng(2);
        for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = rng.uniform(-1.0, 1.0);
        const std::vector<int> labels = {0, 1};
        ad::Tape tape;
        ModelVars vars = lift_parameters(tape, m);
        auto grads = tape.backward(nll_loss(tape, m, vars, batch, labels));
        bool ok = true;
        // probe the first coupling's first kernel tensor entry by entry
        Tensor* kern = m.parameters()[0].tensor;
        const Tensor got = grads.at(vars.of(*kern).id);
        for (std::size_t i = 0; i < kern->size() && ok; ++i) {
            const double orig = (*kern)[i];
            const double h = 1e-5;
            auto eval = [&]() {
                ad::Tape t2;
                ModelVars v2 = lift_parameters(t2, m);
                return nll_loss(t2, m, v2, batch, labels).value()[0];
            };
            (*kern)[i] = orig + h;
            const double up = eval();
            (*kern)[i] = orig - h;
            const double down = eval();
            (*kern)[i] = orig;
            const double want = (up - down) / (2.0 * h);
            const double denom = std::max({1e-8, std::abs(want), std::abs(got[i])});
            ok = std::abs(got[i] - want) / denom < 1e-4;
        }
        checks.push_back({"gradients vs finite differences", ok});
    }
    {  // exact OT vs brute force over permutations, and sinkhorn agreement
        Rng rng(5);
        bool ok = true;
        for (int trial = 0; trial < 5 && ok; ++trial) {
            Tensor a({4, 2}), b({4, 2});
            for (std::size_t i = 0; i < a.size(); ++i) {
                a[i] = rng.uniform(-2.0, 2.0);
                b[i] = rng.uniform(-2.0, 2.0);
            }
            DiscreteDistribution P = DiscreteDistribution::uniform(a);
            DiscreteDistribution Q = DiscreteDistribution::uniform(b);
            const Tensor dist = cost_matrix(a, b, Metric::Euclidean);
            double best = std::numeric_limits<double>::infinity();
            std::vector<std::size_t> perm = {0, 1, 2, 3};
            do {
                double c = 0.0;
                for (std::size_t i = 0; i < 4; ++i) c += dist(i, perm[i]);
                best = std::min(best, c / 4.0);
            } while (std::next_permutation(perm.begin(), perm.end()));
            const double exact = exact_ot(P, Q, Metric::Euclidean).cost;
            const double approx = sinkhorn(P, Q, Metric::Euclidean, 1e-3).cost;
            ok = std::abs(exact - best) < 1e-9 &&
                 std::abs(approx - exact) <= 0.01 * std::max(exact, 1e-6);
        }
        checks.push_back({"optimal transport vs enumeration + sinkhorn", ok});
    }

    bool all_ok = true;
    for (const auto& c : checks) {
        std::cout << (c.ok ? "[PASS] " : "[FAIL] ") << c.name << "\n";
        all_ok = all_ok && c.ok;
    }
    std::cout << (all_ok ? "selfcheck: all checks passed"
                         : "selfcheck: FAILURES detected")
              << "\n";
    return all_ok ? 0 : 3;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"sigflow: invertible-flow modeling of multichannel signals"};
    app.require_subcommand(1);

    std::string config_path, out_path, model_path, dataset_path;
    int cls = 0;
    std::size_t count = 0, dim = 0, ratio = 3;
    std::uint64_t seed = 0;
    std::vector<double> sweep_values;
    std::string objective, output_dir;
    long long epochs = -1;
    double lr = -1.0;

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file");
        sub->add_option("--output-dir", output_dir, "directory for outputs");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_config(synth);
    synth->add_option("-o,--out", out_path, "output dataset file")->required();
    auto* synth_seed = synth->add_option("--seed", seed, "generation seed");
    auto* synth_n = synth->add_option("--n-per-class", count, "trials per class");

    CLI::App* train = app.add_subcommand("train", "train a model on a dataset");
    add_config(train);
    train->add_option("dataset", dataset_path, "dataset file")->required();
    train->add_option("--objective", objective, "ml or ot")
        ->check(CLI::IsMember({"ml", "ot"}));
    auto* train_epochs = train->add_option("--epochs", epochs, "epoch count");
    auto* train_lr = train->add_option("--lr", lr, "learning rate");
    auto* train_seed = train->add_option("--seed", seed, "training seed");

    CLI::App* sample = app.add_subcommand("sample", "draw signals from a model");
    add_config(sample);
    sample->add_option("model", model_path, "model file")->required();
    sample->add_option("--class", cls, "class index")->required();
    sample->add_option("--count", count, "number of signals")->required();
    sample->add_option("--seed", seed, "sampling seed");
    sample->add_option("-o,--out", out_path, "output dataset file")->required();

    CLI::App* classify_cmd = app.add_subcommand("classify", "per-trial predictions");
    add_config(classify_cmd);
    classify_cmd->add_option("model", model_path)->required();
    classify_cmd->add_option("dataset", dataset_path)->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "accuracy and likelihood report");
    add_config(eval_cmd);
    eval_cmd->add_option("model", model_path)->required();
    eval_cmd->add_option("dataset", dataset_path)->required();

    CLI::App* spectra = app.add_subcommand("spectra", "real vs generated spectra");
    add_config(spectra);
    spectra->add_option("model", model_path)->required();
    spectra->add_option("dataset", dataset_path)->required();

    CLI::App* prototype = app.add_subcommand("prototype", "class prototypes");
    add_config(prototype);
    prototype->add_option("model", model_path)->required();

    CLI::App* sweep = app.add_subcommand("sweep", "latent dimension sweep");
    add_config(sweep);
    sweep->add_option("model", model_path)->required();
    sweep->add_option("--class", cls, "class index")->required();
    sweep->add_option("--dim", dim, "latent dimension")->required();
    sweep->add_option("--values", sweep_values, "values to sweep")->required();

    CLI::App* match = app.add_subcommand("match", "match generated to real by transport");
    add_config(match);
    match->add_option("model", model_path)->required();
    match->add_option("dataset", dataset_path)->required();
    match->add_option("--ratio", ratio, "generated per real trial");
    match->add_option("--seed", seed, "sampling seed");

    app.add_subcommand("selfcheck", "run the built-in invariant suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        RunConfig config = default_run_config();
        if (!config_path.empty()) load_run_config(config_path, config);
        if (!output_dir.empty()) config.output_dir = output_dir;

        if (synth->parsed()) {
            if (synth_seed->count()) config.synth.seed = seed;
            if (synth_n->count()) config.synth.n_per_class = count;
            return cmd_synth(config, out_path);
        }
        if (train->parsed()) {
            if (!objective.empty())
                config.train.objective = objective == "ml" ? Objective::MaxLikelihood
                                                           : Objective::OptimalTransport;
            if (train_epochs->count()) {
                if (epochs < 0) throw DataError("epochs must be nonnegative");
                config.train.epochs = static_cast<std::size_t>(epochs);
            }
            if (train_lr->count()) config.train.learning_rate = lr;
            if (train_seed->count()) config.train.seed = seed;
            return cmd_train(config, dataset_path);
        }
        if (sample->parsed())
            return cmd_sample(config, model_path, cls, count, seed, out_path);
        if (classify_cmd->parsed())
            return cmd_eval(config, model_path, dataset_path, "classify");
        if (eval_cmd->parsed()) return cmd_eval(config, model_path, dataset_path, "eval");
        if (spectra->parsed()) return cmd_spectra(config, model_path, dataset_path);
        if (prototype->parsed()) return cmd_prototype(config, model_path);
        if (sweep->parsed())
            return cmd_sweep(config, model_path, cls, dim, sweep_values);
        if (match->parsed())
            return cmd_match(config, model_path, dataset_path, ratio, seed);
        return cmd_selfcheck();
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace sigflow::cli
