#include "sigflow/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace sigflow {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Tensor flat_trial(const SignalDataset& d, std::size_t i) {
    return d.trial(i).reshaped({d.channels() * d.samples()});
}

std::vector<Tensor> collect_grads(ad::Tape& tape, const ad::Var& loss,
                                  const ModelVars& vars, std::size_t epoch) {
    auto grad_map = tape.backward(loss);
    std::vector<Tensor> grads;
    grads.reserve(vars.vars.size());
    for (std::size_t p = 0; p < vars.vars.size(); ++p) {
        auto it = grad_map.find(vars.vars[p].id);
        Tensor g = it != grad_map.end() ? it->second
                                        : Tensor(vars.params[p].tensor->shape());
        if (!all_finite(g))
            throw NumericError("non-finite gradient for parameter '" +
                               vars.params[p].name + "' in epoch " +
                               std::to_string(epoch));
        grads.push_back(std::move(g));
    }
    return grads;
}

void check_model_compat(const FlowModel& model, const SignalDataset& d,
                        const char* which) {
    if (d.channels() != model.channels || d.samples() != model.samples)
        throw ShapeError(std::string(which) + " dataset shape (C=" +
                         std::to_string(d.channels()) + ", T=" +
                         std::to_string(d.samples()) + ") does not match model (C=" +
                         std::to_string(model.channels) + ", T=" +
                         std::to_string(model.samples) + ")");
}

EpochRecord evaluate_epoch(const FlowModel& model, const SignalDataset& train,
                           const SignalDataset& valid, std::size_t epoch,
                           bool gate_active) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_log_likelihood = mean_log_likelihood(model, train);
    rec.valid_log_likelihood = mean_log_likelihood(model, valid);
    rec.train_accuracy = accuracy(model, train);
    rec.valid_accuracy = accuracy(model, valid);
    rec.gate_active = gate_active;
    return rec;
}

void maybe_checkpoint(const FlowModel& model, const TrainConfig& config,
                      std::size_t epoch) {
    if (config.checkpoint_every == 0) return;
    if (epoch % config.checkpoint_every != 0) return;
    save_model(model, config.checkpoint_prefix + "_epoch" + std::to_string(epoch) +
                          ".sgfl");
}

}  // namespace

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw DataError("learning_rate must be positive");
    if (batch_size < 1) throw DataError("batch_size must be at least 1");
    if (ot.ratio < 1) throw DataError("ot ratio must be at least 1");
    if (checkpoint_every > 0 && checkpoint_prefix.empty())
        throw DataError("checkpoint_every requires a checkpoint_prefix");
    if (prior_reg && prior_reg->penalty_weight < 0.0)
        throw DataError("penalty_weight must be nonnegative");
}

double GaussianBaseline::log_prob(const Tensor& x) const {
    if (x.size() != mean.size())
        throw ShapeError("baseline dimension " + std::to_string(mean.size()) +
                         " does not match input size " + std::to_string(x.size()));
    double lp = 0.0;
    for (std::size_t j = 0; j < mean.size(); ++j) {
        const double ls = log_std[j];
        const double z = (x[j] - mean[j]) * std::exp(-ls);
        lp += -ls - 0.5 * kLog2Pi - 0.5 * z * z;
    }
    return lp;
}

GaussianBaseline fit_gaussian_baseline(const SignalDataset& train) {
    train.validate();
    const std::size_t n = train.n_trials();
    if (n == 0) throw DataError("cannot fit a baseline to an empty dataset");
    const std::size_t d = train.channels() * train.samples();
    GaussianBaseline g;
    g.mean = Tensor({d});
    g.log_std = Tensor({d});
    for (std::size_t i = 0; i < n; ++i) {
        Tensor x = flat_trial(train, i);
        for (std::size_t j = 0; j < d; ++j) g.mean[j] += x[j];
    }
    for (std::size_t j = 0; j < d; ++j) g.mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor x = flat_trial(train, i);
        for (std::size_t j = 0; j < d; ++j) {
            const double c = x[j] - g.mean[j];
            g.log_std[j] += c * c;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        const double var = g.log_std[j] / static_cast<double>(n);
        g.log_std[j] = 0.5 * std::log(std::max(var, 1e-12));
    }
    return g;
}

void adam_update(std::vector<NamedParam>& params, const std::vector<Tensor>& grads,
                 AdamState& state, double learning_rate) {
    if (params.size() != grads.size())
        throw ShapeError("adam: parameter and gradient counts differ");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.tensor->shape());
            state.v.emplace_back(p.tensor->shape());
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& theta = *params[p].tensor;
        const Tensor& g = grads[p];
        if (!g.same_shape(theta))
            throw ShapeError("adam: gradient shape mismatch for " + params[p].name);
        for (std::size_t j = 0; j < theta.size(); ++j) {
            state.m[p][j] = state.beta1 * state.m[p][j] + (1.0 - state.beta1) * g[j];
            state.v[p][j] = state.beta2 * state.v[p][j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = state.m[p][j] / bc1;
            const double vhat = state.v[p][j] / bc2;
            theta[j] -= learning_rate * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

ad::Var nll_loss(ad::Tape& tape, const FlowModel& model, const ModelVars& vars,
                 const Tensor& batch, const std::vector<int>& labels) {
    if (batch.rank() != 3)
        throw ShapeError("nll_loss expects a (B, C, T) batch, got " +
                         shape_str(batch.shape()));
    const std::size_t B = batch.dim(0), C = batch.dim(1), T = batch.dim(2);
    if (labels.size() != B)
        throw ShapeError("label count does not match batch size");
    if (C != model.channels || T != model.samples)
        throw ShapeError("batch shape does not match model input");
    const std::size_t d = model.latent_dim();
    ad::Var means_v = vars.of(model.prior.means);
    ad::Var log_stds_v = vars.of(model.prior.log_stds);

    ad::Var acc;
    for (std::size_t b = 0; b < B; ++b) {
        if (labels[b] < 0) throw DataError("negative class label");
        const auto y = static_cast<std::size_t>(labels[b]);
        model.prior.check_class(y);
        Tensor xb({C, T});
        std::copy_n(batch.data() + b * C * T, C * T, xb.data());
        ad::Var h = flow_forward_ad(model, vars, ad::constant(tape, std::move(xb)));
        ad::Var lp = log_prob_ad(tape, means_v, log_stds_v, ad::reshape(h, {d}), y);
        // every layer is volume preserving, so the log-det addend is exactly 0
        lp = ad::add_scalar(lp, 0.0);
        acc = b == 0 ? lp : ad::add(acc, lp);
    }
    return ad::scale(acc, -1.0 / static_cast<double>(B));
}

ClassifyResult classify(const FlowModel& model, const Tensor& x) {
    if (x.rank() != 2 || x.dim(0) != model.channels || x.dim(1) != model.samples)
        throw ShapeError("classify expects a (C, T) = (" +
                         std::to_string(model.channels) + ", " +
                         std::to_string(model.samples) + ") signal, got " +
                         shape_str(x.shape()));
    FlowOutput out = flow_forward(model, x);
    ClassifyResult r;
    r.posterior = model.prior.class_posterior(out.latent);
    for (std::size_t y = 1; y < r.posterior.size(); ++y)
        if (r.posterior[y] > r.posterior[static_cast<std::size_t>(r.label)])
            r.label = static_cast<int>(y);
    return r;
}

bool prior_comparison_gate(double ll_flow_train, double ll_flow_valid,
                           double ll_gauss_valid) {
    return (ll_flow_valid - ll_gauss_valid) < (ll_flow_train - ll_flow_valid);
}

ad::Var prior_comparison_penalty(ad::Tape& tape, const FlowModel& model,
                                 const ModelVars& vars, const Tensor& batch,
                                 const PriorRegConfig& reg) {
    const std::size_t B = batch.dim(0), C = batch.dim(1), T = batch.dim(2);
    const std::size_t d = model.latent_dim();
    ad::Var means_v = vars.of(model.prior.means);
    ad::Var log_stds_v = vars.of(model.prior.log_stds);
    ad::Var acc;
    for (std::size_t b = 0; b < B; ++b) {
        Tensor xb({C, T});
        std::copy_n(batch.data() + b * C * T, C * T, xb.data());
        const double lp_gauss = reg.baseline.log_prob(xb);
        ad::Var h = flow_forward_ad(model, vars, ad::constant(tape, std::move(xb)));
        ad::Var lp_flow = log_prob_marginal_ad(tape, means_v, log_stds_v,
                                               ad::reshape(h, {d}), model.n_classes());
        ad::Var gap = ad::add_scalar(lp_flow, -lp_gauss);
        ad::Var sq = ad::mul(gap, gap);
        acc = b == 0 ? sq : ad::add(acc, sq);
    }
    return ad::scale(acc, reg.penalty_weight / static_cast<double>(B));
}

MixtureStepResult mixture_minibatch_step(ad::Tape& tape, const FlowModel& model,
                                         const SignalDataset& train,
                                         const std::vector<std::size_t>& batch_indices,
                                         const Tensor& valid_batch,
                                         ad::Var per_point_log_stds,
                                         const Tensor& frozen_log_stds) {
    (void)tape;  // nodes attach to the tape that owns per_point_log_stds
    const std::size_t N = train.n_trials();
    if (per_point_log_stds.value().size() != N || frozen_log_stds.size() != N)
        throw ShapeError("per-point log-std arrays must have one entry per training trial");
    if (batch_indices.empty()) throw DataError("mixture batch must be nonempty");
    const std::size_t B = valid_batch.dim(0);
    const std::size_t C = valid_batch.dim(1), T = valid_batch.dim(2);
    const std::size_t d = C * T;
    const double dd = static_cast<double>(d);

    MixtureStepResult result;
    ad::Var acc;
    for (std::size_t b = 0; b < B; ++b) {
        Tensor v({C, T});
        std::copy_n(valid_batch.data() + b * C * T, C * T, v.data());
        // the model's own density at v is a constant for this step
        const double p_flow =
            std::exp(model.prior.log_prob_marginal(flow_forward(model, v).latent));
        Tensor vf = v.reshaped({d});

        double frozen_sum = 0.0;
        ad::Var updated_sum;
        bool first = true;
        for (std::size_t i : batch_indices) {
            if (i >= N) throw ShapeError("mixture batch index out of range");
            Tensor xi = flat_trial(train, i);
            double sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double c = vf[j] - xi[j];
                sq += c * c;
            }
            const double fls = frozen_log_stds[i];
            frozen_sum += std::exp(-dd * fls - 0.5 * dd * kLog2Pi -
                                   0.5 * std::exp(-2.0 * fls) * sq);

            ad::Var ls = ad::element(per_point_log_stds, i);
            ad::Var log_upd = ad::add(
                ad::add_scalar(ad::scale(ls, -dd), -0.5 * dd * kLog2Pi),
                ad::scale(ad::vexp(ad::scale(ls, -2.0)), -0.5 * sq));
            ad::Var upd = ad::vexp(log_upd);
            updated_sum = first ? upd : ad::add(updated_sum, upd);
            first = false;
        }
        const double invN = 1.0 / static_cast<double>(N);
        ad::Var corrected = ad::add_scalar(ad::scale(updated_sum, invN),
                                           p_flow - invN * frozen_sum);
        if (corrected.value()[0] <= 1e-300) ++result.clamped;
        ad::Var ll = ad::vlog(ad::cmax(corrected, 1e-300));
        acc = b == 0 ? ll : ad::add(acc, ll);
    }
    result.loss = ad::scale(acc, -1.0 / static_cast<double>(B));
    return result;
}

ad::Var ot_generator_loss(ad::Tape& tape, const FlowModel& model, const ModelVars& vars,
                          const SignalDataset& train, Rng& rng, const OtConfig& config) {
    const std::size_t n = train.n_trials();
    if (n == 0) throw DataError("OT loss needs a nonempty training set");
    const std::size_t d = model.latent_dim();
    const Shape latent_shape = model.latent_shape();
    ad::Var means_v = vars.of(model.prior.means);
    ad::Var log_stds_v = vars.of(model.prior.log_stds);

    // generated points per class, counts matching the training label frequencies
    struct Group {
        std::vector<std::size_t> real_idx;
        std::vector<ad::Var> gen;  // flattened (d) generated signals
    };
    std::vector<Group> by_class(model.n_classes());
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<std::size_t>(train.labels[i]);
        model.prior.check_class(y);
        by_class[y].real_idx.push_back(i);
    }
    for (std::size_t y = 0; y < by_class.size(); ++y) {
        const std::size_t m = config.ratio * by_class[y].real_idx.size();
        for (std::size_t j = 0; j < m; ++j) {
            Tensor eps({d});
            for (std::size_t k = 0; k < d; ++k) eps[k] = rng.gaussian();
            ad::Var h = ad::add(ad::row(means_v, y),
                                ad::mul(ad::vexp(ad::row(log_stds_v, y)),
                                        ad::constant(tape, std::move(eps))));
            ad::Var x = flow_inverse_ad(model, vars, ad::reshape(h, latent_shape));
            by_class[y].gen.push_back(ad::reshape(x, {d}));
        }
    }

    // plan groups: one per class, or everything pooled
    std::vector<Group> groups;
    if (config.class_conditional) {
        for (auto& g : by_class)
            if (!g.real_idx.empty()) groups.push_back(std::move(g));
    } else {
        Group all;
        for (auto& g : by_class) {
            all.real_idx.insert(all.real_idx.end(), g.real_idx.begin(), g.real_idx.end());
            all.gen.insert(all.gen.end(), g.gen.begin(), g.gen.end());
        }
        groups.push_back(std::move(all));
    }

    ad::Var total;
    bool first_group = true;
    for (const Group& group : groups) {
        const std::size_t gn = group.real_idx.size();
        const std::size_t gm = group.gen.size();
        Tensor real({gn, d});
        for (std::size_t i = 0; i < gn; ++i) {
            Tensor x = flat_trial(train, group.real_idx[i]);
            std::copy_n(x.data(), d, real.data() + i * d);
        }
        Tensor gen_pts({gm, d});
        for (std::size_t j = 0; j < gm; ++j)
            std::copy_n(group.gen[j].value().data(), d, gen_pts.data() + j * d);

        DiscreteDistribution P = DiscreteDistribution::uniform(real);
        DiscreteDistribution Q = DiscreteDistribution::uniform(gen_pts);
        TransportPlan plan =
            config.sinkhorn_epsilon > 0.0
                ? sinkhorn(P, Q, config.metric, config.sinkhorn_epsilon)
                : exact_ot(P, Q, config.metric);

        ad::Var group_loss;
        bool first_term = true;
        if (config.metric == Metric::SquaredEuclidean) {
            // sum_ij pi_ij |x_i - g_j|^2 = sum_j [a_j |g_j|^2 - 2 b_j . g_j] + const
            double const_term = 0.0;
            for (std::size_t i = 0; i < gn; ++i) {
                double rowmass = 0.0;
                for (std::size_t j = 0; j < gm; ++j) rowmass += plan.coupling(i, j);
                double sq = 0.0;
                for (std::size_t k = 0; k < d; ++k) sq += real(i, k) * real(i, k);
                const_term += rowmass * sq;
            }
            for (std::size_t j = 0; j < gm; ++j) {
                double a = 0.0;
                Tensor b({d});
                for (std::size_t i = 0; i < gn; ++i) {
                    const double w = plan.coupling(i, j);
                    if (w == 0.0) continue;
                    a += w;
                    for (std::size_t k = 0; k < d; ++k) b[k] += w * real(i, k);
                }
                if (a == 0.0) continue;
                const ad::Var& g = group.gen[j];
                ad::Var term = ad::sub(
                    ad::scale(ad::sum(ad::mul(g, g)), a),
                    ad::scale(ad::sum(ad::mul(g, ad::constant(tape, b))), 2.0));
                group_loss = first_term ? term : ad::add(group_loss, term);
                first_term = false;
            }
            group_loss = ad::add_scalar(group_loss, const_term);
        } else {
            // euclidean: walk the (sparse) support of the plan directly
            for (std::size_t i = 0; i < gn; ++i) {
                Tensor xi({d});
                std::copy_n(real.data() + i * d, d, xi.data());
                ad::Var xi_v = ad::constant(tape, xi);
                for (std::size_t j = 0; j < gm; ++j) {
                    const double w = plan.coupling(i, j);
                    if (w < 1e-12) continue;
                    ad::Var diff = ad::sub(group.gen[j], xi_v);
                    ad::Var sq = ad::cmax(ad::sum(ad::mul(diff, diff)), 1e-30);
                    ad::Var dist = ad::vexp(ad::scale(ad::vlog(sq), 0.5));
                    ad::Var term = ad::scale(dist, w);
                    group_loss = first_term ? term : ad::add(group_loss, term);
                    first_term = false;
                }
            }
        }
        const double weight = static_cast<double>(gn) / static_cast<double>(n);
        ad::Var weighted = ad::scale(group_loss, weight);
        total = first_group ? weighted : ad::add(total, weighted);
        first_group = false;
    }
    return total;
}

TrainReport train_max_likelihood(FlowModel& model, const SignalDataset& train,
                                 const SignalDataset& valid, const TrainConfig& config) {
    config.validate();
    train.validate();
    valid.validate();
    if (train.n_trials() == 0) throw DataError("training set is empty");
    check_model_compat(model, train, "training");
    check_model_compat(model, valid, "validation");

    const double amplitude = config.dequant_amplitude < 0.0
                                 ? estimate_quantization_step(train)
                                 : config.dequant_amplitude;
    Rng rng(config.seed);
    auto params = model.parameters();
    AdamState state;
    TrainReport report;

    const std::size_t n = train.n_trials();
    const std::size_t C = train.channels(), T = train.samples();
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();

        bool gate = false;
        if (config.prior_reg) {
            const double ll_train = mean_log_likelihood(model, train);
            const double ll_valid = mean_log_likelihood(model, valid);
            double ll_gauss = 0.0;
            for (std::size_t i = 0; i < valid.n_trials(); ++i)
                ll_gauss += config.prior_reg->baseline.log_prob(flat_trial(valid, i));
            ll_gauss /= static_cast<double>(valid.n_trials());
            gate = prior_comparison_gate(ll_train, ll_valid, ll_gauss);
        }

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);

        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t B = std::min(config.batch_size, n - start);
            Tensor batch({B, C, T});
            std::vector<int> labels(B);
            for (std::size_t b = 0; b < B; ++b) {
                const std::size_t i = order[start + b];
                Tensor x = dequantize(train.trial(i), amplitude, rng);
                std::copy_n(x.data(), C * T, batch.data() + b * C * T);
                labels[b] = train.labels[i];
            }
            ad::Tape tape;
            ModelVars vars = lift_parameters(tape, model);
            ad::Var loss = nll_loss(tape, model, vars, batch, labels);
            if (gate && config.prior_reg->penalty_weight > 0.0)
                loss = ad::add(loss, prior_comparison_penalty(tape, model, vars, batch,
                                                              *config.prior_reg));
            auto grads = collect_grads(tape, loss, vars, epoch);
            adam_update(params, grads, state, config.learning_rate);
        }

        EpochRecord rec = evaluate_epoch(model, train, valid, epoch, gate);
        rec.wall_time_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.records.push_back(rec);
        maybe_checkpoint(model, config, epoch);
    }
    return report;
}

TrainReport train_ot(FlowModel& model, const SignalDataset& train,
                     const SignalDataset& valid, const TrainConfig& config) {
    config.validate();
    train.validate();
    valid.validate();
    if (train.n_trials() == 0) throw DataError("training set is empty");
    check_model_compat(model, train, "training");
    check_model_compat(model, valid, "validation");

    Rng rng(config.seed);
    auto params = model.parameters();
    AdamState state;
    TrainReport report;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        ad::Tape tape;
        ModelVars vars = lift_parameters(tape, model);
        ad::Var loss = ot_generator_loss(tape, model, vars, train, rng, config.ot);
        auto grads = collect_grads(tape, loss, vars, epoch);
        adam_update(params, grads, state, config.learning_rate);

        EpochRecord rec = evaluate_epoch(model, train, valid, epoch, false);
        rec.wall_time_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.records.push_back(rec);
        maybe_checkpoint(model, config, epoch);
    }
    return report;
}

double mean_log_likelihood(const FlowModel& model, const SignalDataset& dataset) {
    const std::size_t n = dataset.n_trials();
    if (n == 0) throw DataError("cannot evaluate likelihood on an empty dataset");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        FlowOutput out = flow_forward(model, dataset.trial(i));
        total += model.prior.log_prob_marginal(out.latent) + out.log_det_jacobian;
    }
    return total / static_cast<double>(n);
}

double accuracy(const FlowModel& model, const SignalDataset& dataset) {
    const std::size_t n = dataset.n_trials();
    if (n == 0) throw DataError("cannot evaluate accuracy on an empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (classify(model, dataset.trial(i)).label == dataset.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(n);
}

void write_report_csv(const TrainReport& report, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    os.precision(17);
    os << "epoch,train_log_likelihood,valid_log_likelihood,train_accuracy,"
          "valid_accuracy,gate_active\n";
    for (const auto& r : report.records)
        os << r.epoch << ',' << r.train_log_likelihood << ',' << r.valid_log_likelihood
           << ',' << r.train_accuracy << ',' << r.valid_accuracy << ','
           << (r.gate_active ? 1 : 0) << '\n';
    if (!os) throw DataError("write failure for " + path);
}

void write_report_jsonl(const TrainReport& report, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open " + path + " for writing");
    for (const auto& r : report.records) {
        nlohmann::json j{{"epoch", r.epoch},
                         {"train_log_likelihood", r.train_log_likelihood},
                         {"valid_log_likelihood", r.valid_log_likelihood},
                         {"train_accuracy", r.train_accuracy},
                         {"valid_accuracy", r.valid_accuracy},
                         {"gate_active", r.gate_active}};
        os << j.dump() << '\n';
    }
    if (!os) throw DataError("write failure for " + path);
}

}  // namespace sigflow
