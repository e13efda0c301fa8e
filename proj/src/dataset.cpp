#include "sigflow/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace sigflow {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxDim = 1ull << 30;

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw DataError(std::string("dataset file truncated while reading ") + what);
}

template <typename T>
void write_pod(std::ostream& os, T v) {
    write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v;
    read_bytes(is, &v, sizeof(T), what);
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<std::uint64_t>(os, s.size());
    write_bytes(os, s.data(), s.size());
}

std::string read_string(std::istream& is, const char* what) {
    const auto len = read_pod<std::uint64_t>(is, what);
    if (len > kMaxDim) throw DataError(std::string("unreasonable string length for ") + what);
    std::string s(len, '\0');
    read_bytes(is, s.data(), len, what);
    return s;
}

std::vector<std::size_t> indices_of_class(const SignalDataset& d, int cls) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d.labels.size(); ++i)
        if (d.labels[i] == cls) out.push_back(i);
    return out;
}

SignalDataset subset(const SignalDataset& d, const std::vector<std::size_t>& idx) {
    SignalDataset out;
    out.sample_rate_hz = d.sample_rate_hz;
    out.channel_names = d.channel_names;
    out.class_names = d.class_names;
    const std::size_t ct = d.channels() * d.samples();
    out.data = Tensor({idx.size(), d.channels(), d.samples()});
    out.labels.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        std::copy_n(d.data.data() + idx[k] * ct, ct, out.data.data() + k * ct);
        out.labels.push_back(d.labels[idx[k]]);
    }
    return out;
}

}  // namespace

Tensor SignalDataset::trial(std::size_t i) const {
    if (i >= n_trials()) throw ShapeError("trial index out of range");
    const std::size_t ct = channels() * samples();
    Tensor out({channels(), samples()});
    std::copy_n(data.data() + i * ct, ct, out.data());
    return out;
}

void SignalDataset::set_trial(std::size_t i, const Tensor& t) {
    if (i >= n_trials()) throw ShapeError("trial index out of range");
    if (t.rank() != 2 || t.dim(0) != channels() || t.dim(1) != samples())
        throw ShapeError("trial tensor must be (C, T) = (" + std::to_string(channels()) +
                         ", " + std::to_string(samples()) + "), got " + shape_str(t.shape()));
    std::copy_n(t.data(), t.size(), data.data() + i * t.size());
}

std::vector<std::size_t> SignalDataset::class_counts() const {
    std::vector<std::size_t> counts(n_classes(), 0);
    for (int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= counts.size())
            throw DataError("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(counts.size()) + ")");
        ++counts[static_cast<std::size_t>(label)];
    }
    return counts;
}

void SignalDataset::validate() const {
    if (data.rank() != 3)
        throw ShapeError("dataset data must be (n, C, T), got " + shape_str(data.shape()));
    if (labels.size() != n_trials())
        throw DataError("label count " + std::to_string(labels.size()) +
                        " does not match trial count " + std::to_string(n_trials()));
    if (!channel_names.empty() && channel_names.size() != channels())
        throw DataError("channel name count does not match channel count");
    if (sample_rate_hz <= 0.0) throw DataError("sample rate must be positive");
    class_counts();  // checks label range
}

void SynthConfig::validate() const {
    if (n_per_class == 0) throw DataError("n_per_class must be positive");
    if (channels == 0 || samples == 0) throw DataError("channels and samples must be positive");
    if (sample_rate_hz <= 0.0) throw DataError("sample rate must be positive");
    if (suppression < 0.0 || suppression >= 1.0)
        throw DataError("suppression must lie in [0, 1)");
    if (noise_std < 0.0) throw DataError("noise_std must be nonnegative");
    // need enough signal for the oscillation to be identifiable
    const double cycles = alpha_hz * static_cast<double>(samples) / sample_rate_hz;
    if (cycles < 10.0)
        throw DataError("trial covers only " + std::to_string(cycles) +
                        " oscillation cycles; need at least 10");
}

SignalDataset synth_generate(const SynthConfig& config) {
    config.validate();
    const std::size_t C = config.channels, T = config.samples;
    const std::size_t n = 2 * config.n_per_class;
    const std::size_t suppressed = (C + 1) / 2;

    SignalDataset out;
    out.sample_rate_hz = config.sample_rate_hz;
    out.class_names = {"rest", "right_hand"};
    for (std::size_t c = 0; c < C; ++c) out.channel_names.push_back("ch" + std::to_string(c));
    out.data = Tensor({n, C, T});
    out.labels.resize(n);

    Rng rng(config.seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i < config.n_per_class ? 0 : 1;
        out.labels[i] = label;
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t c = 0; c < C; ++c) {
            double amp = config.alpha_amplitude;
            if (label == 1 && c < suppressed) amp *= config.suppression;
            for (std::size_t t = 0; t < T; ++t) {
                const double time = static_cast<double>(t) / config.sample_rate_hz;
                double v = amp * std::sin(2.0 * std::numbers::pi * config.alpha_hz * time + phase);
                if (config.noise_std > 0.0) v += config.noise_std * rng.gaussian();
                out.data(i, c, t) = v;
            }
        }
    }
    return out;
}

SignalDataset pad_virtual_channel(const SignalDataset& dataset) {
    dataset.validate();
    if (dataset.channels() % 2 == 0) return dataset;
    const std::size_t n = dataset.n_trials(), C = dataset.channels(), T = dataset.samples();
    SignalDataset out;
    out.labels = dataset.labels;
    out.sample_rate_hz = dataset.sample_rate_hz;
    out.channel_names = dataset.channel_names;
    if (out.channel_names.empty())
        for (std::size_t c = 0; c < C; ++c) out.channel_names.push_back("ch" + std::to_string(c));
    out.channel_names.push_back("virtual");
    out.class_names = dataset.class_names;
    out.data = Tensor({n, C + 1, T});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(dataset.data.data() + i * C * T, C * T, out.data.data() + i * (C + 1) * T);
        // the new (C+1)-th channel stays zero from Tensor's zero init
    }
    return out;
}

SignalDataset strip_virtual_channel(const SignalDataset& dataset) {
    dataset.validate();
    if (dataset.channel_names.empty() || dataset.channel_names.back() != "virtual")
        return dataset;
    const std::size_t n = dataset.n_trials(), C = dataset.channels(), T = dataset.samples();
    SignalDataset out;
    out.labels = dataset.labels;
    out.sample_rate_hz = dataset.sample_rate_hz;
    out.channel_names.assign(dataset.channel_names.begin(), dataset.channel_names.end() - 1);
    out.class_names = dataset.class_names;
    out.data = Tensor({n, C - 1, T});
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(dataset.data.data() + i * C * T, (C - 1) * T,
                    out.data.data() + i * (C - 1) * T);
    return out;
}

std::pair<SignalDataset, SignalDataset> split_train_valid(const SignalDataset& dataset,
                                                          double fraction,
                                                          std::uint64_t seed) {
    dataset.validate();
    if (fraction <= 0.0 || fraction >= 1.0)
        throw DataError("split fraction must lie strictly between 0 and 1");
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::size_t> train_idx, valid_idx;
    const std::size_t n_classes = dataset.n_classes() > 0
                                      ? dataset.n_classes()
                                      : static_cast<std::size_t>(
                                            *std::max_element(dataset.labels.begin(),
                                                              dataset.labels.end()) + 1);
    for (std::size_t cls = 0; cls < n_classes; ++cls) {
        auto idx = indices_of_class(dataset, static_cast<int>(cls));
        if (idx.size() < 2)
            throw DataError("class " + std::to_string(cls) + " has " +
                            std::to_string(idx.size()) +
                            " trials; need at least 2 to split");
        rng.shuffle(idx);
        std::size_t n_train = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(idx.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + n_train);
        valid_idx.insert(valid_idx.end(), idx.begin() + n_train, idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(valid_idx.begin(), valid_idx.end());
    return {subset(dataset, train_idx), subset(dataset, valid_idx)};
}

void save_dataset(const SignalDataset& dataset, const std::string& path) {
    dataset.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path + " for writing");
    write_bytes(os, kMagic, 4);
    write_pod<std::uint32_t>(os, kVersion);
    write_pod<std::uint64_t>(os, dataset.n_trials());
    write_pod<std::uint64_t>(os, dataset.channels());
    write_pod<std::uint64_t>(os, dataset.samples());
    write_pod<double>(os, dataset.sample_rate_hz);
    write_pod<std::uint64_t>(os, dataset.channel_names.size());
    for (const auto& s : dataset.channel_names) write_string(os, s);
    write_pod<std::uint64_t>(os, dataset.class_names.size());
    for (const auto& s : dataset.class_names) write_string(os, s);
    for (int label : dataset.labels) write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(label));
    write_bytes(os, dataset.data.data(), dataset.data.size() * sizeof(double));
    if (!os) throw DataError("write failure while saving " + path);
}

SignalDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open dataset file " + path);
    char magic[4];
    read_bytes(is, magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw DataError(path + " is not a dataset file (bad magic)");
    const auto version = read_pod<std::uint32_t>(is, "version");
    if (version != kVersion)
        throw DataError("unsupported dataset format version " + std::to_string(version));
    const auto n = read_pod<std::uint64_t>(is, "trial count");
    const auto C = read_pod<std::uint64_t>(is, "channel count");
    const auto T = read_pod<std::uint64_t>(is, "sample count");
    if (n > kMaxDim || C > kMaxDim || T > kMaxDim)
        throw DataError("dataset dimensions overflow sanity bounds");
    SignalDataset out;
    out.sample_rate_hz = read_pod<double>(is, "sample rate");
    const auto n_chan_names = read_pod<std::uint64_t>(is, "channel name count");
    if (n_chan_names > kMaxDim) throw DataError("channel name count overflows sanity bounds");
    for (std::uint64_t i = 0; i < n_chan_names; ++i)
        out.channel_names.push_back(read_string(is, "channel name"));
    const auto n_class_names = read_pod<std::uint64_t>(is, "class name count");
    if (n_class_names > kMaxDim) throw DataError("class name count overflows sanity bounds");
    for (std::uint64_t i = 0; i < n_class_names; ++i)
        out.class_names.push_back(read_string(is, "class name"));
    out.labels.resize(n);
    for (std::uint64_t i = 0; i < n; ++i)
        out.labels[i] = static_cast<int>(read_pod<std::uint32_t>(is, "labels"));
    out.data = Tensor({n, C, T});
    read_bytes(is, out.data.data(), out.data.size() * sizeof(double), "signal data");
    out.validate();
    return out;
}

void export_csv(const SignalDataset& dataset, const std::string& data_path,
                const std::string& labels_path) {
    dataset.validate();
    std::ofstream ds(data_path);
    if (!ds) throw DataError("cannot open " + data_path + " for writing");
    ds.precision(17);
    const std::size_t n = dataset.n_trials(), C = dataset.channels(), T = dataset.samples();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t t = 0; t < T; ++t) {
                if (t) ds << ',';
                ds << dataset.data(i, c, t);
            }
            ds << '\n';
        }
    }
    std::ofstream ls(labels_path);
    if (!ls) throw DataError("cannot open " + labels_path + " for writing");
    ls << "label\n";
    for (int label : dataset.labels) ls << label << '\n';
    if (!ds || !ls) throw DataError("write failure while exporting CSV");
}

SignalDataset import_csv(const std::string& data_path, const std::string& labels_path,
                         std::size_t channels, double sample_rate_hz) {
    if (channels == 0) throw DataError("channel count must be positive");
    std::ifstream ds(data_path);
    if (!ds) throw DataError("cannot open data CSV " + data_path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(ds, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                row.push_back(std::stod(cell, &pos));
                if (pos != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw DataError("non-numeric cell '" + cell + "' in " + data_path);
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataError("ragged CSV row in " + data_path + ": expected " +
                            std::to_string(rows.front().size()) + " columns, got " +
                            std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("data CSV " + data_path + " is empty");
    if (rows.size() % channels != 0)
        throw DataError("row count " + std::to_string(rows.size()) +
                        " is not a multiple of channel count " + std::to_string(channels));

    std::ifstream ls(labels_path);
    if (!ls) throw DataError("cannot open labels CSV " + labels_path);
    std::vector<int> labels;
    bool first = true;
    while (std::getline(ls, line)) {
        if (line.empty()) continue;
        if (first && line == "label") {
            first = false;
            continue;
        }
        first = false;
        try {
            std::size_t pos = 0;
            labels.push_back(std::stoi(line, &pos));
            if (pos != line.size()) throw std::invalid_argument(line);
        } catch (const std::exception&) {
            throw DataError("non-integer label '" + line + "' in " + labels_path);
        }
    }

    const std::size_t n = rows.size() / channels;
    const std::size_t T = rows.front().size();
    if (labels.size() != n)
        throw DataError("labels file has " + std::to_string(labels.size()) +
                        " entries but data implies " + std::to_string(n) + " trials");

    SignalDataset out;
    out.sample_rate_hz = sample_rate_hz;
    out.labels = std::move(labels);
    out.data = Tensor({n, channels, T});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < channels; ++c)
            std::copy(rows[i * channels + c].begin(), rows[i * channels + c].end(),
                      out.data.data() + (i * channels + c) * T);
    for (std::size_t c = 0; c < channels; ++c) out.channel_names.push_back("ch" + std::to_string(c));
    const int max_label = *std::max_element(out.labels.begin(), out.labels.end());
    for (int cls = 0; cls <= max_label; ++cls)
        out.class_names.push_back("class" + std::to_string(cls));
    out.validate();
    return out;
}

double estimate_quantization_step(const SignalDataset& dataset) {
    std::set<double> values(dataset.data.data(), dataset.data.data() + dataset.data.size());
    double step = std::numeric_limits<double>::infinity();
    auto it = values.begin();
    if (it == values.end()) return 0.0;
    double prev = *it++;
    for (; it != values.end(); ++it) {
        step = std::min(step, *it - prev);
        prev = *it;
    }
    return std::isfinite(step) ? step : 0.0;
}

Tensor dequantize(const Tensor& x, double amplitude, Rng& rng) {
    if (amplitude < 0.0) throw DataError("dequantization amplitude must be nonnegative");
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += amplitude * rng.uniform();
    return out;
}

}  // namespace sigflow
