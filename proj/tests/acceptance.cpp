// Acceptance suite: one [PASS]/[FAIL] line per criterion, exit 0 iff all pass.
//
// Every tolerance is pinned here, next to the check that uses it. The oracles
// (finite differences, brute-force enumeration, trapezoid quadrature) are
// independent re-derivations, not calls back into the code under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sigflow/cli.hpp"
#include "sigflow/dataset.hpp"
#include "sigflow/flow.hpp"
#include "sigflow/prior.hpp"
#include "sigflow/rng.hpp"
#include "sigflow/spectrum.hpp"
#include "sigflow/training.hpp"
#include "sigflow/transport.hpp"
#include "sigflow/viz.hpp"

namespace fs = std::filesystem;
using namespace sigflow;

namespace {

struct Outcome {
    std::string name;
    bool ok = false;
    std::string detail;
};

std::vector<Outcome> results;

void record(const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << " — " << detail << "\n"
              << std::flush;
    results.push_back({name, ok, detail});
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// A model with every layer kind present and non-identity coupling weights.
FlowModel perturbed_model(std::size_t C, std::size_t T, int stages, std::uint64_t seed) {
    ArchitectureConfig ac;
    ac.channels = C;
    ac.samples = T;
    ac.n_classes = 2;
    ac.n_stages = stages;
    ac.init_seed = seed;
    FlowModel m = build_architecture(ac);
    Rng rng(seed ^ 0xabcdefULL);
    for (auto& p : m.parameters()) {
        if (p.name.rfind("prior.", 0) == 0) continue;
        for (std::size_t i = 0; i < p.tensor->size(); ++i)
            (*p.tensor)[i] += rng.uniform(-0.2, 0.2);
    }
    return m;
}

// ---------------------------------------------------------------------------
// 1. Invertibility and 2. volume preservation share the same model sweep.

void criterion_invertibility_and_volume() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t combos[][3] = {{2, 16, 1}, {4, 32, 2}, {2, 64, 3}, {6, 24, 1}};
    double worst = 0.0;
    bool logdet_zero = true;
    for (int k = 0; k < 100; ++k) {
        const auto& c = combos[k % 4];
        FlowModel m = perturbed_model(c[0], c[1], static_cast<int>(c[2]),
                                      static_cast<std::uint64_t>(k));
        Rng rng(1000 + static_cast<std::uint64_t>(k));
        Tensor x({c[0], c[1]});
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-3.0, 3.0);
        FlowOutput out = flow_forward(m, x);
        if (out.log_det_jacobian != 0.0) logdet_zero = false;
        worst = std::max(
            worst, max_abs_diff(flow_inverse(m, out.latent).reshaped({c[0], c[1]}), x));
    }
    const double elapsed = seconds_since(t0);
    record("invertibility (100 models, max |f_inv(f(x)) - x|)",
           worst < 1e-8 && elapsed < 30.0,
           "max err " + fmt(worst) + ", " + fmt(elapsed) + " s");

    // Finite-difference Jacobian of a 2-D toy flow at 20 points: |det - 1| < 1e-4.
    FlowModel toy = perturbed_model(1, 2, 1, 7);
    Rng rng(77);
    double worst_det = 0.0;
    for (int p = 0; p < 20; ++p) {
        Tensor x({1, 2}, {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)});
        const double h = 1e-6;
        double J[2][2];
        for (std::size_t j = 0; j < 2; ++j) {
            Tensor up = x, dn = x;
            up[j] += h;
            dn[j] -= h;
            Tensor fu = flow_forward(toy, up).latent;
            Tensor fd = flow_forward(toy, dn).latent;
            for (std::size_t i = 0; i < 2; ++i) J[i][j] = (fu[i] - fd[i]) / (2.0 * h);
        }
        const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
        worst_det = std::max(worst_det, std::abs(std::abs(det) - 1.0));
    }
    record("volume preservation (log-det 0, FD Jacobian det)",
           logdet_zero && worst_det < 1e-4,
           std::string("log-det identically zero: ") + (logdet_zero ? "yes" : "no") +
               ", max |det - 1| " + fmt(worst_det));
}

// ---------------------------------------------------------------------------
// 3. Density normalization at d = 2, before and after 20 training epochs.

double integrate_density(FlowModel& m) {
    const int grid = 400;
    const double lim = 8.0, step = 2.0 * lim / grid;
    double mass = 0.0;
    for (int a = 0; a <= grid; ++a) {
        const double wa = (a == 0 || a == grid) ? 0.5 : 1.0;
        for (int b = 0; b <= grid; ++b) {
            const double wb = (b == 0 || b == grid) ? 0.5 : 1.0;
            Tensor x({1, 2}, {-lim + a * step, -lim + b * step});
            mass +=
                wa * wb * std::exp(m.prior.log_prob_marginal(flow_forward(m, x).latent));
        }
    }
    return mass * step * step;
}

void criterion_normalization() {
    FlowModel m = perturbed_model(1, 2, 1, 21);
    const double before = integrate_density(m);

    // 2-D two-class blobs, 20 max-likelihood epochs.
    Rng rng(5);
    const std::size_t n = 64;
    SignalDataset train;
    train.data = Tensor({n, 1, 2});
    train.sample_rate_hz = 2.0;
    train.channel_names = {"c0"};
    train.class_names = {"a", "b"};
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % 2);
        train.labels.push_back(y);
        const double center = y == 0 ? -1.0 : 1.0;
        train.data(i, 0, 0) = center + 0.5 * rng.gaussian();
        train.data(i, 0, 1) = -center + 0.5 * rng.gaussian();
    }
    TrainConfig tc;
    tc.learning_rate = 0.01;
    tc.epochs = 20;
    tc.seed = 3;
    train_max_likelihood(m, train, train, tc);
    const double after = integrate_density(m);

    record("density normalization (d=2, before/after training)",
           std::abs(before - 1.0) < 0.02 && std::abs(after - 1.0) < 0.02,
           "mass before " + fmt(before) + ", after " + fmt(after));
}

// ---------------------------------------------------------------------------
// 4. Gradient correctness: 100 random probes against central finite differences.

void criterion_gradients() {
    FlowModel m = perturbed_model(4, 8, 2, 33);
    Rng data_rng(13);
    Tensor batch({3, 4, 8});
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = data_rng.uniform(-1.5, 1.5);
    const std::vector<int> labels = {0, 1, 0};

    SignalDataset tiny;
    tiny.data = Tensor({4, 4, 8});
    tiny.sample_rate_hz = 8.0;
    tiny.channel_names = {"a", "b", "c", "d"};
    tiny.class_names = {"x", "y"};
    for (std::size_t i = 0; i < tiny.data.size(); ++i)
        tiny.data[i] = data_rng.uniform(-1.0, 1.0);
    tiny.labels = {0, 1, 0, 1};
    OtConfig ot;
    ot.ratio = 2;

    auto params = m.parameters();
    Rng probe_rng(99);
    double worst = 0.0;
    for (int probe = 0; probe < 100; ++probe) {
        auto& par = params[probe_rng.integer(params.size())];
        if (par.tensor->empty()) continue;
        const std::size_t idx = par.tensor->size() == 0 ? 0 : probe_rng.integer(par.tensor->size());
        const bool use_ot = probe % 5 == 4;  // 80 likelihood probes, 20 transport probes

        auto eval = [&]() {
            ad::Tape t;
            ModelVars v = lift_parameters(t, m);
            if (use_ot) {
                Rng gen_rng(4242);  // fixed draw keeps the objective deterministic
                return ot_generator_loss(t, m, v, tiny, gen_rng, ot).value()[0];
            }
            return nll_loss(t, m, v, batch, labels).value()[0];
        };
        ad::Tape tape;
        ModelVars vars = lift_parameters(tape, m);
        ad::Var loss = [&]() {
            if (use_ot) {
                Rng gen_rng(4242);
                return ot_generator_loss(tape, m, vars, tiny, gen_rng, ot);
            }
            return nll_loss(tape, m, vars, batch, labels);
        }();
        auto grads = tape.backward(loss);
        const auto it = grads.find(vars.of(*par.tensor).id);
        const double got = it == grads.end() ? 0.0 : it->second[idx];

        const double orig = (*par.tensor)[idx];
        const double h = 1e-5;
        (*par.tensor)[idx] = orig + h;
        const double up = eval();
        (*par.tensor)[idx] = orig - h;
        const double down = eval();
        (*par.tensor)[idx] = orig;
        const double want = (up - down) / (2.0 * h);
        const double denom = std::max({1e-8, std::abs(want), std::abs(got)});
        worst = std::max(worst, std::abs(got - want) / denom);
    }
    record("gradient correctness (100 probes vs finite differences)", worst < 1e-4,
           "max rel err " + fmt(worst));
}

// ---------------------------------------------------------------------------
// 5. Optimal-transport oracle equivalence.

// Exact brute force for uniform instances: replicate to lcm(n, m) unit masses
// and run exhaustive dynamic programming over remaining source capacities.
double dp_uniform_ot(const Tensor& dist) {
    const std::size_t n = dist.dim(0), m = dist.dim(1);
    const std::size_t l = std::lcm(n, m);
    const std::size_t cap0 = l / n;   // units each source holds
    const std::size_t need = l / m;   // units each target must receive
    std::vector<std::size_t> caps(n, cap0);
    std::map<std::pair<std::size_t, std::vector<std::size_t>>, double> memo;

    std::function<double(std::size_t, std::vector<std::size_t>&)> solve =
        [&](std::size_t j, std::vector<std::size_t>& c) -> double {
        if (j == m) return 0.0;
        auto key = std::make_pair(j, c);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        // distribute `need` units of target j over the sources
        double best = std::numeric_limits<double>::infinity();
        std::function<void(std::size_t, std::size_t, double)> distribute =
            [&](std::size_t i, std::size_t left, double acc) {
                if (left == 0) {
                    best = std::min(best, acc + solve(j + 1, c));
                    return;
                }
                if (i == n) return;
                const std::size_t take_max = std::min(left, c[i]);
                for (std::size_t take = 0; take <= take_max; ++take) {
                    c[i] -= take;
                    distribute(i + 1, left - take,
                               acc + static_cast<double>(take) * dist(i, j));
                    c[i] += take;
                }
            };
        distribute(0, need, 0.0);
        memo.emplace(std::move(key), best);
        return best;
    };
    return solve(0, caps) / static_cast<double>(l);
}

void criterion_ot_oracle() {
    Rng rng(17);
    double worst_exact = 0.0;
    for (std::size_t n = 1; n <= 6; ++n) {
        for (std::size_t m = 1; m <= 6; ++m) {
            Tensor a({n, 2}), b({m, 2});
            for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(-2.0, 2.0);
            for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-2.0, 2.0);
            for (Metric metric : {Metric::Euclidean, Metric::SquaredEuclidean}) {
                const double oracle = dp_uniform_ot(cost_matrix(a, b, metric));
                const double got = exact_ot(DiscreteDistribution::uniform(a),
                                            DiscreteDistribution::uniform(b), metric)
                                       .cost;
                worst_exact = std::max(worst_exact, std::abs(got - oracle));
            }
        }
    }
    double worst_sink = 0.0;
    for (int t = 0; t < 20; ++t) {
        Tensor a({8, 3}), b({8, 3});
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = rng.uniform(-2.0, 2.0);
            b[i] = rng.uniform(-2.0, 2.0);
        }
        DiscreteDistribution P = DiscreteDistribution::uniform(a);
        DiscreteDistribution Q = DiscreteDistribution::uniform(b);
        const double exact = exact_ot(P, Q, Metric::Euclidean).cost;
        const double approx = sinkhorn(P, Q, Metric::Euclidean, 1e-3).cost;
        worst_sink = std::max(worst_sink, std::abs(approx - exact) / exact);
    }
    record("transport oracle equivalence (n,m <= 6 enumeration; sinkhorn 1%)",
           worst_exact < 1e-9 && worst_sink < 0.01,
           "max exact gap " + fmt(worst_exact) + ", max sinkhorn rel " + fmt(worst_sink));
}

// ---------------------------------------------------------------------------
// Shared surrogate dataset: 160 train / 40 valid from the default generator.

struct Surrogate {
    SignalDataset train, valid;
};

Surrogate make_surrogate() {
    SynthConfig sc;  // defaults: 100 per class, 4 x 512 at 250 Hz
    SignalDataset full = synth_generate(sc);
    auto [train, valid] = split_train_valid(full, 0.8, 0);
    return {std::move(train), std::move(valid)};
}

FlowModel surrogate_model(const SignalDataset& train, int stages) {
    ArchitectureConfig ac;
    ac.channels = train.channels();
    ac.samples = train.samples();
    ac.n_classes = train.n_classes();
    ac.n_stages = stages;
    return build_architecture(ac);
}

// 6. Maximum-likelihood surrogate: 50 epochs, valid LL improves, accuracy >= 0.90.
void criterion_ml_surrogate(const Surrogate& s) {
    const auto t0 = std::chrono::steady_clock::now();
    FlowModel m = surrogate_model(s.train, 1);
    const double init_vll = mean_log_likelihood(m, s.valid);
    TrainConfig tc;
    tc.learning_rate = 0.03;
    tc.epochs = 50;
    tc.seed = 0;
    train_max_likelihood(m, s.train, s.valid, tc);
    const double vll = mean_log_likelihood(m, s.valid);
    const double acc = accuracy(m, s.valid);
    const double elapsed = seconds_since(t0);
    record("max-likelihood surrogate (50 epochs: LL up, accuracy >= 0.90)",
           vll > init_vll && acc >= 0.90 && elapsed < 600.0,
           "valid LL " + fmt(init_vll) + " -> " + fmt(vll) + ", accuracy " + fmt(acc) +
               ", " + fmt(elapsed) + " s");
}

// 7. Optimal-transport surrogate: validation accuracy reaches >= 0.75.
void criterion_ot_surrogate(const Surrogate& s) {
    const auto t0 = std::chrono::steady_clock::now();
    FlowModel m = surrogate_model(s.train, 0);
    TrainConfig tc;
    tc.objective = Objective::OptimalTransport;
    tc.learning_rate = 0.1;
    tc.epochs = 400;
    tc.seed = 0;
    TrainReport rep = train_ot(m, s.train, s.valid, tc);
    double best = 0.0;
    for (const auto& r : rep.records) best = std::max(best, r.valid_accuracy);
    const double elapsed = seconds_since(t0);
    record("optimal-transport surrogate (accuracy reaches >= 0.75)",
           best >= 0.75 && elapsed < 900.0,
           "best valid accuracy " + fmt(best) + ", final " +
               fmt(rep.records.back().valid_accuracy) + ", " + fmt(elapsed) + " s");
}

// 8./9. Spectra fidelity and prototype physiology use a longer likelihood run
// whose per-dimension scales have converged.
void criterion_spectra_and_prototype(const Surrogate& s) {
    FlowModel m = surrogate_model(s.train, 0);
    TrainConfig tc;
    tc.learning_rate = 0.05;
    tc.batch_size = 16;
    tc.epochs = 300;
    tc.seed = 0;
    train_max_likelihood(m, s.train, s.valid, tc);

    SignalDataset gen = sample_signals(m, s.train.labels, 123, s.train.sample_rate_hz);
    const std::size_t seg = 128;
    double worst_median = 0.0;
    for (std::size_t c = 0; c < s.train.channels(); ++c) {
        Spectrum sr = mean_spectrum(s.train.data, c, s.train.sample_rate_hz, seg);
        Spectrum sg = mean_spectrum(gen.data, c, s.train.sample_rate_hz, seg);
        std::vector<double> errs;
        for (std::size_t b = 0; b < sr.freqs_hz.size(); ++b)
            if (sr.freqs_hz[b] >= 5.0 && sr.freqs_hz[b] <= 15.0)
                errs.push_back(std::abs(std::log10(sg.power[b] / sr.power[b])));
        std::sort(errs.begin(), errs.end());
        worst_median = std::max(worst_median, errs[errs.size() / 2]);
    }
    record("spectra fidelity (median |log10 power err| 5-15 Hz < 0.3)",
           worst_median < 0.3, "worst channel median " + fmt(worst_median));

    // Prototypes: alpha suppression on the first half of the channels.
    Tensor p_rest = prototype_invert(m, 0);
    Tensor p_rh = prototype_invert(m, 1);
    const std::size_t T = s.train.samples();
    bool suppressed = true;
    std::string detail;
    for (std::size_t c = 0; c < (s.train.channels() + 1) / 2; ++c) {
        Tensor ra({T}), rb({T});
        for (std::size_t t = 0; t < T; ++t) {
            ra[t] = p_rest(c, t);
            rb[t] = p_rh(c, t);
        }
        const double rest = welch_spectrum(ra, s.train.sample_rate_hz, seg).band_power(8, 12);
        const double rh = welch_spectrum(rb, s.train.sample_rate_hz, seg).band_power(8, 12);
        suppressed = suppressed && rh < rest;
        detail += "ch" + std::to_string(c) + " " + fmt(rh) + " vs " + fmt(rest) + "; ";
    }
    record("prototype physiology (8-12 Hz suppressed on left channels)", suppressed,
           detail);
}

// ---------------------------------------------------------------------------
// 10. Overfitting pathology on a single quantized point (16 dimensions).

SignalDataset zero_point_copies(std::size_t n) {
    SignalDataset d;
    d.data = Tensor({n, 2, 8});  // one all-zero quantized point, n copies
    d.labels.assign(n, 0);
    d.sample_rate_hz = 16.0;
    d.channel_names = {"c0", "c1"};
    d.class_names = {"only"};
    return d;
}

void criterion_overfitting_pathology() {
    // Without dequantization the density spike grows without bound.
    SignalDataset train = zero_point_copies(64);
    ArchitectureConfig ac;
    ac.channels = 2;
    ac.samples = 8;
    ac.n_classes = 1;
    ac.n_stages = 0;
    FlowModel grow = build_architecture(ac);
    TrainConfig tc;
    tc.learning_rate = 0.052;
    tc.batch_size = 1;
    tc.epochs = 200;
    tc.dequant_amplitude = 0.0;
    tc.seed = 0;
    TrainReport rep = train_max_likelihood(grow, train, train, tc);
    const double final_ll = rep.records.back().train_log_likelihood;

    // With dequantization at the (declared) quantization step it plateaus.
    FlowModel flat = build_architecture(ac);
    TrainConfig td;
    td.learning_rate = 0.03;
    td.batch_size = 64;
    td.epochs = 400;
    td.dequant_amplitude = 32.0;
    td.seed = 0;
    TrainReport repd = train_max_likelihood(flat, train, train, td);
    double lo = 1e300, hi = -1e300;
    for (std::size_t e = repd.records.size() - 50; e < repd.records.size(); ++e) {
        lo = std::min(lo, repd.records[e].train_log_likelihood);
        hi = std::max(hi, repd.records[e].train_log_likelihood);
    }
    record("overfitting pathology (grows > 1e4 nats; dequantized run plateaus)",
           final_ll > 1e4 && hi - lo < 1.0,
           "train LL " + fmt(final_ll) + " without dequantization; last-50 spread " +
               fmt(hi - lo) + " with");
}

// ---------------------------------------------------------------------------
// 11. Experimental-idea sanity: mixture collapse identity and gate truth table.

void criterion_experimental_sanity() {
    // per-point stds equal to frozen stds: corrected likelihood is exactly p_f.
    SignalDataset train;
    train.data = Tensor({3, 1, 2}, {0.1, -0.2, 0.4, 0.9, -0.7, 0.3});
    train.labels = {0, 0, 0};
    train.sample_rate_hz = 2.0;
    train.channel_names = {"c0"};
    train.class_names = {"only"};
    ArchitectureConfig ac;
    ac.channels = 1;
    ac.samples = 2;
    ac.n_classes = 1;
    ac.n_stages = 0;
    FlowModel m = build_architecture(ac);
    Tensor frozen({3}, {-0.5, -0.2, -0.8});
    Tensor valid_batch({2, 1, 2}, {0.3, -0.4, 1.1, 0.2});
    ad::Tape tape;
    ad::Var pp = tape.leaf(frozen, true);
    auto res = mixture_minibatch_step(tape, m, train, {0, 1, 2}, valid_batch, pp, frozen);
    double direct = 0.0;
    for (std::size_t b = 0; b < 2; ++b) {
        Tensor v({1, 2});
        std::copy_n(valid_batch.data() + b * 2, 2, v.data());
        direct += m.prior.log_prob_marginal(flow_forward(m, v).latent);
    }
    direct = -direct / 2.0;
    const double gap = std::abs(res.loss.value()[0] - direct);

    // Gate truth table on the three worked examples.
    const bool gate_ok = !prior_comparison_gate(-10.0, -12.0, -20.0) &&
                         prior_comparison_gate(-10.0, -19.0, -20.0) &&
                         !prior_comparison_gate(-10.0, -10.0, -12.0);
    record("experimental-idea sanity (mixture collapse; gate truth table)",
           gap < 1e-12 && gate_ok,
           "mixture gap " + fmt(gap) + ", gate table " + (gate_ok ? "ok" : "wrong"));
}

// ---------------------------------------------------------------------------
// 12. Determinism: cmd_train twice, byte-identical reports and checkpoints.

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void criterion_determinism() {
    const fs::path base = fs::temp_directory_path() / "sigflow_acceptance";
    fs::remove_all(base);
    fs::create_directories(base);

    cli::RunConfig synth_cfg = cli::default_run_config();
    synth_cfg.synth.n_per_class = 8;
    synth_cfg.synth.channels = 2;
    synth_cfg.synth.samples = 64;
    synth_cfg.synth.sample_rate_hz = 64.0;
    synth_cfg.output_dir = base.string();
    const std::string data = (base / "d.sgds").string();
    cli::cmd_synth(synth_cfg, data);

    // Identical config both times: same output directory, files snapshotted
    // between the runs.
    cli::RunConfig rc = synth_cfg;
    rc.n_stages = 1;
    rc.train.epochs = 3;
    rc.train.learning_rate = 0.01;
    rc.train.checkpoint_every = 1;
    rc.output_dir = (base / "run").string();
    bool identical = true;
    std::vector<std::pair<fs::path, std::string>> first;
    for (int run = 0; run < 2; ++run) {
        cli::cmd_train(rc, data);
        std::vector<std::pair<fs::path, std::string>> blobs;
        std::vector<fs::path> names;
        for (const auto& e : fs::directory_iterator(rc.output_dir))
            names.push_back(e.path());
        std::sort(names.begin(), names.end());
        for (const auto& p : names) blobs.emplace_back(p, slurp(p));
        if (run == 0)
            first = std::move(blobs);
        else
            identical = blobs == first;
    }
    record("determinism (cmd_train twice is byte-identical)", identical,
           identical ? "reports and checkpoints match byte for byte"
                     : "outputs differ between runs");
    fs::remove_all(base);
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    criterion_invertibility_and_volume();
    criterion_normalization();
    criterion_gradients();
    criterion_ot_oracle();
    const Surrogate s = make_surrogate();
    criterion_ml_surrogate(s);
    criterion_ot_surrogate(s);
    criterion_spectra_and_prototype(s);
    criterion_overfitting_pathology();
    criterion_experimental_sanity();
    criterion_determinism();

    std::size_t failed = 0;
    for (const auto& r : results)
        if (!r.ok) ++failed;
    std::cout << results.size() - failed << "/" << results.size() << " criteria passed in "
              << fmt(seconds_since(t0)) << " s\n";
    return failed == 0 ? 0 : 1;
}
