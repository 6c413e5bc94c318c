#pragma once

#include "rfbarrier/geometry.hpp"
#include "rfbarrier/pipeline.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rfbarrier {

using Row = std::vector<double>;
using Matrix = std::vector<Row>;

// Per-column z-scoring fitted on training data. Constant columns get unit scale.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const Matrix& x);
    Row apply(std::span<const double> row) const;
    std::size_t dimension() const { return mean.size(); }
};

// ---------------------------------------------------------------------------
// k-NN

struct KnnModel {
    int k = 3;
    Standardizer stats;
    Matrix x; // standardized training rows
    std::vector<Label> y;
};

KnnModel knn_fit(const Matrix& x, const std::vector<Label>& y, int k);
// Majority of the k nearest; ties go to the smaller mean distance, then to the
// label with more training samples.
Label knn_predict(const KnnModel& model, std::span<const double> query);

// ---------------------------------------------------------------------------
// SVM

enum class KernelKind { linear, rbf };

struct Kernel {
    KernelKind kind = KernelKind::rbf;
    double gamma = 0.0; // rbf only; <= 0 means 1 / dimension at fit time

    double operator()(std::span<const double> a, std::span<const double> b) const;
};

struct SvmParams {
    Kernel kernel;
    double c = 10.0;
    double tolerance = 1e-3;
    long max_iterations = 1'000'000;
};

struct SvmModel {
    Kernel kernel; // gamma resolved
    double c = 10.0;
    double tolerance = 1e-3;
    Standardizer stats;
    Matrix support_vectors; // standardized
    std::vector<std::size_t> support_indices; // rows of the training matrix
    std::vector<double> alpha;                // per support vector, in (0, C]
    std::vector<int> sign;                    // +1 truck, -1 passenger car
    double bias = 0.0;
    long iterations = 0;
    double max_kkt_residual = 0.0;

    double decision(std::span<const double> query) const; // raw query
};

SvmModel svm_fit(const Matrix& x, const std::vector<Label>& y, const SvmParams& params = {});
Label svm_predict(const SvmModel& model, std::span<const double> query);

// KKT residual of every training row for the given dual solution, measured on
// the margin y f(x): 0 for a satisfied condition.
std::vector<double> svm_kkt_residuals(const SvmModel& model, const Matrix& x,
                                      const std::vector<Label>& y);

// ---------------------------------------------------------------------------
// Length threshold

struct LengthThresholdModel {
    double threshold = 0.0; // lengths >= threshold are trucks
    double training_accuracy = 0.0;
};

LengthThresholdModel length_threshold_fit(std::span<const double> lengths,
                                          const std::vector<Label>& y);
Label length_threshold_predict(const LengthThresholdModel& model, double length);
Label length_only_classify(std::span<const double> lengths, const std::vector<Label>& y,
                           double query);

// ---------------------------------------------------------------------------
// Unified learner

enum class LearnerKind { knn, svm, length_threshold };

struct LearnerSpec {
    LearnerKind kind = LearnerKind::knn;
    int k = 3;
    SvmParams svm;
};

std::string_view to_string(LearnerKind kind);
LearnerKind parse_learner(std::string_view name);

class Model {
public:
    using Variant = std::variant<KnnModel, SvmModel, LengthThresholdModel>;

    Model() = default;
    explicit Model(Variant v, std::size_t dimension) : impl_(std::move(v)), dimension_(dimension) {}

    LearnerKind kind() const;
    std::size_t dimension() const { return dimension_; }
    Label predict(const FeatureVector& row) const;
    const Variant& impl() const { return impl_; }

private:
    Variant impl_;
    std::size_t dimension_ = 0;
};

Model fit_model(const LearnerSpec& spec, std::span<const FeatureVector> rows);

void save_model(std::ostream& out, const Model& model);
Model load_model(std::istream& in);

// ---------------------------------------------------------------------------
// Evaluation

struct TypeRate {
    VehicleType type = VehicleType::passenger_car;
    std::size_t samples = 0;
    std::size_t correct = 0;
};

struct EvaluationReport {
    std::array<std::array<std::size_t, 2>, 2> confusion{}; // [true][predicted]
    std::vector<TypeRate> per_type;                         // types present, catalogue order
    std::size_t correct = 0;
    std::size_t total = 0;

    double overall_percent() const;
};

EvaluationReport tally(std::span<const VehicleType> types, std::span<const Label> predicted);
EvaluationReport evaluate(const Model& model, std::span<const FeatureVector> test);

double percent(std::size_t correct, std::size_t total);
// Two decimals, e.g. "98.68".
std::string format_percent(double value);

// Arithmetic mean and sample standard deviation (n - 1).
std::pair<double, double> mean_std(std::span<const double> values);

// ---------------------------------------------------------------------------
// Cross-validation

struct CvSummary {
    std::vector<double> fold_accuracies; // fractions
    double mean = 0.0;                   // fraction
    double sample_std = 0.0;
    std::vector<std::vector<std::uint64_t>> fold_event_ids; // test fold members, ascending
    std::vector<std::size_t> train_sizes;
};

// Folds are assigned on event ids, so the result does not depend on row order.
std::vector<std::vector<std::uint64_t>> assign_folds(std::span<const FeatureVector> rows, int folds,
                                                     std::uint64_t seed, bool stratified);

CvSummary cross_validate(std::span<const FeatureVector> rows, const LearnerSpec& spec, int folds,
                         std::uint64_t seed, bool stratified = true, unsigned jobs = 1);

} // namespace rfbarrier
