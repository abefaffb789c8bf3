#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "morsekit/grid.hpp"
#include "morsekit/surrogate.hpp"

namespace morsekit {

struct Dataset {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    int n_classes = 0;
    std::vector<std::string> feature_names;

    std::size_t size() const { return labels.size(); }
    std::size_t feature_dim() const { return features.empty() ? 0 : features.front().size(); }
};

/// CSV with a header row; label_column < 0 means the last column. Labels must
/// be non-negative integers.
Dataset load_dataset_csv(const std::string& path, int label_column = -1);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Deterministic stratified split: per class, shuffle with the split seed and
/// put the first round(train_fraction * count) examples in train.
SplitIndices stratified_split(const std::vector<int>& labels, double train_fraction,
                              std::uint64_t seed);

/// Z-scores every feature with mean and (population) standard deviation
/// computed on the train rows only; constant features are merely centered.
/// Raw feature scales saturate bounded activations and stall SGD, so the
/// driver applies this before training by default.
Dataset standardize_features(Dataset data, const std::vector<std::size_t>& train_indices);

enum class Activation { Tanh, Relu, Identity };
Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

struct NetConfig {
    std::vector<int> layer_widths; // input, hidden..., output
    Activation activation = Activation::Tanh;
    int epochs = 0;
    int batch_size = 1;
    double learning_rate = 0.1;

    void validate() const;
    /// Flattened parameter count: per layer, row-major W then b.
    std::size_t parameter_count() const;
};

struct TrainResult {
    std::vector<double> final_weights;
    std::vector<int> predictions; // per test point, in test-index order
    double balanced_accuracy = 0.0;
    bool diverged = false;
};

/// Plain mini-batch SGD on softmax cross-entropy for exactly net.epochs
/// epochs; batch order is shuffled by the seed. Zero epochs returns the
/// initial weights unchanged.
TrainResult train_once(const NetConfig& net, const Dataset& data, const SplitIndices& split,
                       const std::vector<double>& initial_weights, std::uint64_t seed);

/// Forward pass only: predicted class per listed example.
std::vector<int> predict_classes(const NetConfig& net, const Dataset& data,
                                 const std::vector<std::size_t>& indices,
                                 const std::vector<double>& weights);

struct EnsembleConfig {
    int cycles = 100;
    std::uint64_t base_seed = 0;
    Box init_box; // over the full flattened weight vector

    static Box uniform_init_box(std::size_t params, double lo, double hi);
};

struct EnsembleRecord {
    int cycle = 0;
    std::uint64_t seed = 0;
    bool diverged = false;
    std::vector<double> initial_weights;
    std::vector<double> final_weights;
    std::vector<int> predictions;
    double balanced_accuracy = 0.0;
};

/// K independent training cycles; each cycle's randomness derives solely from
/// (base seed, cycle id), so results are schedule-independent. Throws
/// numerical_error if every cycle diverges.
std::vector<EnsembleRecord> train_ensemble(const NetConfig& net, const Dataset& data,
                                           const SplitIndices& split, const EnsembleConfig& ens,
                                           unsigned threads = 1);

std::uint64_t cycle_seed(std::uint64_t base_seed, int cycle);

/// Shannon entropy (bits) of each test point's predicted class across the
/// non-diverged cycles. Range [0, log2 n_classes].
std::vector<double> prediction_entropy(const std::vector<EnsembleRecord>& records, int n_classes);

/// Macro-averaged recall. Throws validation_error if a class is absent from
/// the labels.
double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                         int n_classes);

/// Coordinates ranked by across-cycle variance of (final - initial),
/// descending, ties broken by lower index; returns the top k.
std::vector<std::size_t> select_coordinates(const std::vector<EnsembleRecord>& records,
                                            std::size_t k);

/// (initial[indices], final[indices]) per non-diverged record, in cycle order.
std::vector<SamplePair> project(const std::vector<EnsembleRecord>& records,
                                const std::vector<std::size_t>& indices);

} // namespace morsekit
