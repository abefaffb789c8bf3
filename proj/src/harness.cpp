#include "morsekit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace morsekit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform double in [0, 1) from the generator's top 53 bits; keeps the
// sequence identical across standard library implementations.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Fisher-Yates with explicit index draws, for the same reason.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace

Dataset load_dataset_csv(const std::string& path, int label_column) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open dataset file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw validation_error("dataset file is empty: " + path);

    auto split_fields = [](const std::string& s) {
        std::vector<std::string> fields;
        std::stringstream ss(s);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        return fields;
    };

    const auto header = split_fields(line);
    if (header.size() < 2) throw validation_error("dataset needs at least one feature and a label");
    const std::size_t n_cols = header.size();
    const std::size_t label_idx = label_column < 0 ? n_cols - 1 : static_cast<std::size_t>(label_column);
    if (label_idx >= n_cols) throw validation_error("label column out of range");

    Dataset data;
    for (std::size_t c = 0; c < n_cols; ++c)
        if (c != label_idx) data.feature_names.push_back(header[c]);

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != n_cols)
            throw validation_error("dataset row " + std::to_string(line_no) + " has wrong arity");
        std::vector<double> x;
        int label = 0;
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (c == label_idx) {
                label = std::stoi(fields[c]);
                if (label < 0) throw validation_error("labels must be non-negative integers");
            } else {
                x.push_back(std::stod(fields[c]));
            }
        }
        data.features.push_back(std::move(x));
        data.labels.push_back(label);
        data.n_classes = std::max(data.n_classes, label + 1);
    }
    if (data.size() == 0) throw validation_error("dataset has no rows: " + path);
    return data;
}

SplitIndices stratified_split(const std::vector<int>& labels, double train_fraction,
                              std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw validation_error("train_fraction must be in (0, 1)");
    int n_classes = 0;
    for (auto l : labels) n_classes = std::max(n_classes, l + 1);

    SplitIndices split;
    for (int c = 0; c < n_classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) members.push_back(i);
        std::mt19937_64 rng(splitmix64(seed ^ (0xa5a5a5a5ULL + static_cast<std::uint64_t>(c))));
        deterministic_shuffle(members, rng);
        const auto n_train = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(members.size())));
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_train ? split.train : split.test).push_back(members[i]);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

Dataset standardize_features(Dataset data, const std::vector<std::size_t>& train_indices) {
    if (train_indices.empty())
        throw validation_error("standardize_features: empty train split");
    const std::size_t d = data.feature_dim();
    for (auto i : train_indices)
        if (i >= data.size())
            throw validation_error("standardize_features: train index out of range");
    const double n = static_cast<double>(train_indices.size());
    for (std::size_t a = 0; a < d; ++a) {
        double mean = 0.0;
        for (auto i : train_indices) mean += data.features[i][a];
        mean /= n;
        double var = 0.0;
        for (auto i : train_indices) {
            const double c = data.features[i][a] - mean;
            var += c * c;
        }
        const double sd = std::sqrt(var / n);
        const double scale = sd > 0.0 ? 1.0 / sd : 1.0;
        for (auto& row : data.features) row[a] = (row[a] - mean) * scale;
    }
    return data;
}

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "identity" || name == "linear") return Activation::Identity;
    throw validation_error("unknown activation: " + name);
}

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
    }
    return "tanh";
}

void NetConfig::validate() const {
    if (layer_widths.size() < 2) throw validation_error("network needs input and output layers");
    for (auto w : layer_widths)
        if (w <= 0) throw validation_error("layer widths must be positive");
    if (epochs < 0) throw validation_error("epochs must be >= 0");
    if (batch_size <= 0) throw validation_error("batch size must be positive");
    if (learning_rate <= 0.0) throw validation_error("learning rate must be positive");
}

std::size_t NetConfig::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l)
        n += static_cast<std::size_t>(layer_widths[l + 1]) *
                 static_cast<std::size_t>(layer_widths[l]) +
             static_cast<std::size_t>(layer_widths[l + 1]);
    return n;
}

namespace {

// Flat weight layout per layer: W row-major (out x in), then b (out).
struct Network {
    const NetConfig& cfg;
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;

    Network(const NetConfig& c, const std::vector<double>& flat) : cfg(c) {
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < c.layer_widths.size(); ++l) {
            const auto rows = c.layer_widths[l + 1];
            const auto cols = c.layer_widths[l];
            Eigen::MatrixXd wl(rows, cols);
            for (int r = 0; r < rows; ++r)
                for (int cc = 0; cc < cols; ++cc) wl(r, cc) = flat[off++];
            Eigen::VectorXd bl(rows);
            for (int r = 0; r < rows; ++r) bl(r) = flat[off++];
            w.push_back(std::move(wl));
            b.push_back(std::move(bl));
        }
    }

    std::vector<double> flatten() const {
        std::vector<double> flat;
        flat.reserve(cfg.parameter_count());
        for (std::size_t l = 0; l < w.size(); ++l) {
            for (int r = 0; r < w[l].rows(); ++r)
                for (int c = 0; c < w[l].cols(); ++c) flat.push_back(w[l](r, c));
            for (int r = 0; r < b[l].rows(); ++r) flat.push_back(b[l](r));
        }
        return flat;
    }

    Eigen::VectorXd activate(const Eigen::VectorXd& z) const {
        switch (cfg.activation) {
            case Activation::Tanh: return z.array().tanh();
            case Activation::Relu: return z.array().max(0.0);
            case Activation::Identity: return z;
        }
        return z;
    }

    Eigen::VectorXd activate_grad(const Eigen::VectorXd& a) const {
        switch (cfg.activation) {
            case Activation::Tanh: return 1.0 - a.array().square();
            case Activation::Relu: return (a.array() > 0.0).cast<double>();
            case Activation::Identity: return Eigen::VectorXd::Ones(a.size());
        }
        return Eigen::VectorXd::Ones(a.size());
    }

    // Returns softmax probabilities; fills per-layer activations when asked.
    Eigen::VectorXd forward(const Eigen::VectorXd& x,
                            std::vector<Eigen::VectorXd>* acts = nullptr) const {
        Eigen::VectorXd a = x;
        if (acts) acts->push_back(a);
        const std::size_t layers = w.size();
        for (std::size_t l = 0; l < layers; ++l) {
            Eigen::VectorXd z = w[l] * a + b[l];
            a = (l + 1 < layers) ? activate(z) : z;
            if (acts) acts->push_back(a);
        }
        // Stable softmax on the final pre-activation.
        const double m = a.maxCoeff();
        Eigen::VectorXd e = (a.array() - m).exp();
        return e / e.sum();
    }
};

} // namespace

std::vector<int> predict_classes(const NetConfig& net, const Dataset& data,
                                 const std::vector<std::size_t>& indices,
                                 const std::vector<double>& weights) {
    Network nn(net, weights);
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
            data.features[i].data(), static_cast<Eigen::Index>(data.features[i].size()));
        const auto p = nn.forward(x);
        Eigen::Index arg = 0;
        p.maxCoeff(&arg);
        out.push_back(static_cast<int>(arg));
    }
    return out;
}

TrainResult train_once(const NetConfig& net, const Dataset& data, const SplitIndices& split,
                       const std::vector<double>& initial_weights, std::uint64_t seed) {
    net.validate();
    if (initial_weights.size() != net.parameter_count())
        throw validation_error("train_once: initial weight length does not match architecture");
    if (static_cast<std::size_t>(net.layer_widths.front()) != data.feature_dim())
        throw validation_error("train_once: input width must equal feature dimension");
    if (net.layer_widths.back() != data.n_classes)
        throw validation_error("train_once: output width must equal class count");

    Network nn(net, initial_weights);
    std::mt19937_64 rng(splitmix64(seed));
    const std::size_t layers = nn.w.size();
    bool diverged = false;

    std::vector<std::size_t> order = split.train;
    for (int epoch = 0; epoch < net.epochs && !diverged; ++epoch) {
        deterministic_shuffle(order, rng);
        for (std::size_t start = 0; start < order.size() && !diverged;
             start += static_cast<std::size_t>(net.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(net.batch_size));
            std::vector<Eigen::MatrixXd> gw(layers);
            std::vector<Eigen::VectorXd> gb(layers);
            for (std::size_t l = 0; l < layers; ++l) {
                gw[l] = Eigen::MatrixXd::Zero(nn.w[l].rows(), nn.w[l].cols());
                gb[l] = Eigen::VectorXd::Zero(nn.b[l].size());
            }
            for (std::size_t s = start; s < end; ++s) {
                const auto i = order[s];
                Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(
                    data.features[i].data(), static_cast<Eigen::Index>(data.features[i].size()));
                std::vector<Eigen::VectorXd> acts;
                const Eigen::VectorXd p = nn.forward(x, &acts);
                const double loss = -std::log(std::max(p(data.labels[i]), 1e-300));
                if (!std::isfinite(loss)) { diverged = true; break; }

                Eigen::VectorXd delta = p;
                delta(data.labels[i]) -= 1.0;
                for (std::size_t l = layers; l-- > 0;) {
                    gw[l] += delta * acts[l].transpose();
                    gb[l] += delta;
                    if (l > 0) {
                        Eigen::VectorXd back = nn.w[l].transpose() * delta;
                        delta = back.cwiseProduct(nn.activate_grad(acts[l]));
                    }
                }
            }
            const double scale = net.learning_rate / static_cast<double>(end - start);
            for (std::size_t l = 0; l < layers; ++l) {
                nn.w[l] -= scale * gw[l];
                nn.b[l] -= scale * gb[l];
                if (!nn.w[l].allFinite() || !nn.b[l].allFinite()) diverged = true;
            }
        }
    }

    TrainResult result;
    result.diverged = diverged;
    result.final_weights = nn.flatten();
    result.predictions = predict_classes(net, data, split.test, result.final_weights);
    std::vector<int> test_labels;
    test_labels.reserve(split.test.size());
    for (auto i : split.test) test_labels.push_back(data.labels[i]);
    result.balanced_accuracy = balanced_accuracy(result.predictions, test_labels, data.n_classes);
    return result;
}

Box EnsembleConfig::uniform_init_box(std::size_t params, double lo, double hi) {
    return Box{std::vector<double>(params, lo), std::vector<double>(params, hi)};
}

std::uint64_t cycle_seed(std::uint64_t base_seed, int cycle) {
    return splitmix64(base_seed ^ splitmix64(static_cast<std::uint64_t>(cycle) + 1));
}

std::vector<EnsembleRecord> train_ensemble(const NetConfig& net, const Dataset& data,
                                           const SplitIndices& split, const EnsembleConfig& ens,
                                           unsigned threads) {
    net.validate();
    if (ens.cycles <= 0) throw validation_error("train_ensemble: cycles must be positive");
    const std::size_t params = net.parameter_count();
    ens.init_box.validate();
    if (ens.init_box.dim() != params)
        throw validation_error("train_ensemble: init box dimension must equal parameter count");

    std::vector<EnsembleRecord> records(static_cast<std::size_t>(ens.cycles));
    auto run_cycle = [&](int cycle) {
        EnsembleRecord rec;
        rec.cycle = cycle;
        rec.seed = cycle_seed(ens.base_seed, cycle);
        std::mt19937_64 rng(rec.seed);
        rec.initial_weights.resize(params);
        for (std::size_t p = 0; p < params; ++p) {
            const double u = uniform01(rng);
            rec.initial_weights[p] = ens.init_box.lower[p] + u * ens.init_box.extent(p);
        }
        const auto result = train_once(net, data, split, rec.initial_weights, rec.seed);
        rec.diverged = result.diverged;
        rec.final_weights = result.final_weights;
        rec.predictions = result.predictions;
        rec.balanced_accuracy = result.balanced_accuracy;
        records[static_cast<std::size_t>(cycle)] = std::move(rec);
    };

    if (threads <= 1 || ens.cycles < 4) {
        for (int c = 0; c < ens.cycles; ++c) run_cycle(c);
    } else {
        const unsigned workers =
            std::min<unsigned>(threads, std::max(1u, std::thread::hardware_concurrency()));
        std::vector<std::thread> pool;
        std::exception_ptr err;
        std::mutex err_mutex;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (int c = static_cast<int>(w); c < ens.cycles;
                         c += static_cast<int>(workers))
                        run_cycle(c);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!err) err = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (err) std::rethrow_exception(err);
    }

    if (std::all_of(records.begin(), records.end(),
                    [](const EnsembleRecord& r) { return r.diverged; }))
        throw numerical_error("train_ensemble: every cycle diverged");
    return records;
}

std::vector<double> prediction_entropy(const std::vector<EnsembleRecord>& records, int n_classes) {
    std::size_t n_points = 0;
    std::size_t n_live = 0;
    for (const auto& r : records) {
        if (r.diverged) continue;
        ++n_live;
        if (n_points == 0) n_points = r.predictions.size();
        if (r.predictions.size() != n_points)
            throw validation_error("prediction_entropy: inconsistent prediction lengths");
    }
    if (n_live == 0) throw validation_error("prediction_entropy: no non-diverged records");

    std::vector<double> entropy(n_points, 0.0);
    for (std::size_t t = 0; t < n_points; ++t) {
        std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
        for (const auto& r : records) {
            if (r.diverged) continue;
            const int c = r.predictions[t];
            if (c < 0 || c >= n_classes)
                throw validation_error("prediction_entropy: prediction out of class range");
            ++counts[static_cast<std::size_t>(c)];
        }
        double h = 0.0;
        for (auto k : counts) {
            if (k == 0) continue;
            const double p = static_cast<double>(k) / static_cast<double>(n_live);
            h -= p * std::log2(p);
        }
        entropy[t] = h;
    }
    return entropy;
}

double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                         int n_classes) {
    if (predictions.size() != labels.size())
        throw validation_error("balanced_accuracy: length mismatch");
    std::vector<std::size_t> hits(static_cast<std::size_t>(n_classes), 0);
    std::vector<std::size_t> totals(static_cast<std::size_t>(n_classes), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes)
            throw validation_error("balanced_accuracy: label out of range");
        ++totals[static_cast<std::size_t>(labels[i])];
        if (predictions[i] == labels[i]) ++hits[static_cast<std::size_t>(labels[i])];
    }
    double sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        if (totals[static_cast<std::size_t>(c)] == 0)
            throw validation_error("balanced_accuracy: class absent from labels");
        sum += static_cast<double>(hits[static_cast<std::size_t>(c)]) /
               static_cast<double>(totals[static_cast<std::size_t>(c)]);
    }
    return sum / static_cast<double>(n_classes);
}

std::vector<std::size_t> select_coordinates(const std::vector<EnsembleRecord>& records,
                                            std::size_t k) {
    std::vector<const EnsembleRecord*> live;
    for (const auto& r : records)
        if (!r.diverged) live.push_back(&r);
    if (live.size() < 2)
        throw validation_error("select_coordinates: need at least 2 non-diverged records");
    const std::size_t params = live.front()->initial_weights.size();
    if (k > params) throw validation_error("select_coordinates: k exceeds weight count");

    std::vector<double> variance(params, 0.0);
    for (std::size_t p = 0; p < params; ++p) {
        double mean = 0.0;
        for (const auto* r : live) mean += r->final_weights[p] - r->initial_weights[p];
        mean /= static_cast<double>(live.size());
        double var = 0.0;
        for (const auto* r : live) {
            const double d = (r->final_weights[p] - r->initial_weights[p]) - mean;
            var += d * d;
        }
        variance[p] = var / static_cast<double>(live.size());
    }
    std::vector<std::size_t> ranked(params);
    std::iota(ranked.begin(), ranked.end(), 0);
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        if (variance[a] != variance[b]) return variance[a] > variance[b];
        return a < b;
    });
    ranked.resize(k);
    return ranked;
}

std::vector<SamplePair> project(const std::vector<EnsembleRecord>& records,
                                const std::vector<std::size_t>& indices) {
    std::vector<SamplePair> pairs;
    for (const auto& r : records) {
        if (r.diverged) continue;
        SamplePair p;
        for (auto i : indices) {
            if (i >= r.initial_weights.size())
                throw validation_error("project: coordinate index out of range");
            p.input.push_back(r.initial_weights[i]);
            p.output.push_back(r.final_weights[i]);
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

} // namespace morsekit
