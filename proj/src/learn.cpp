#include "rfbarrier/learn.hpp"

#include "json_codec.hpp"
#include "rfbarrier/error.hpp"
#include "rfbarrier/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fmt/format.h>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <thread>

namespace rfbarrier {

namespace {

void check_matrix(const Matrix& x, const std::vector<Label>& y) {
    if (x.empty())
        throw InputError("training set is empty");
    if (x.size() != y.size())
        throw InputError(fmt::format("{} feature rows but {} labels", x.size(), y.size()));
    const std::size_t d = x.front().size();
    if (d == 0)
        throw InputError("feature rows are empty");
    for (const auto& r : x)
        if (r.size() != d)
            throw InputError(fmt::format("feature rows mix dimensions {} and {}", d, r.size()));
}

void check_query(std::size_t expected, std::size_t got) {
    if (expected != got)
        throw InputError(fmt::format("query has {} features, model expects {}", got, expected));
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

int sign_of(Label l) { return l == Label::truck ? 1 : -1; }

} // namespace

Standardizer Standardizer::fit(const Matrix& x) {
    Standardizer s;
    if (x.empty())
        return s;
    const std::size_t d = x.front().size();
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 0.0);
    const double n = static_cast<double>(x.size());
    for (const auto& r : x)
        for (std::size_t j = 0; j < d; ++j)
            s.mean[j] += r[j];
    for (auto& m : s.mean)
        m /= n;
    for (const auto& r : x)
        for (std::size_t j = 0; j < d; ++j)
            s.scale[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
    for (std::size_t j = 0; j < d; ++j) {
        const double sd = std::sqrt(s.scale[j] / n);
        // Relative cut-off so that rounding noise in a constant column is not amplified.
        s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? sd : 1.0;
    }
    return s;
}

Row Standardizer::apply(std::span<const double> row) const {
    check_query(mean.size(), row.size());
    Row out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j)
        out[j] = (row[j] - mean[j]) / scale[j];
    return out;
}

// ---------------------------------------------------------------------------

KnnModel knn_fit(const Matrix& x, const std::vector<Label>& y, int k) {
    check_matrix(x, y);
    if (k < 1 || static_cast<std::size_t>(k) > x.size())
        throw ConfigError(fmt::format("k = {} must lie in [1, {}]", k, x.size()));
    KnnModel m;
    m.k = k;
    m.stats = Standardizer::fit(x);
    m.y = y;
    m.x.reserve(x.size());
    for (const auto& r : x)
        m.x.push_back(m.stats.apply(r));
    return m;
}

Label knn_predict(const KnnModel& model, std::span<const double> query) {
    const Row q = model.stats.apply(query);
    std::vector<std::pair<double, std::size_t>> d(model.x.size());
    for (std::size_t i = 0; i < model.x.size(); ++i)
        d[i] = {squared_distance(model.x[i], q), i};
    const auto k = static_cast<std::size_t>(model.k);
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());

    std::array<int, 2> votes{};
    std::array<double, 2> dist_sum{};
    for (std::size_t i = 0; i < k; ++i) {
        const auto l = static_cast<std::size_t>(model.y[d[i].second]);
        ++votes[l];
        dist_sum[l] += std::sqrt(d[i].first);
    }
    if (votes[0] != votes[1])
        return votes[0] > votes[1] ? Label::passenger_car : Label::truck;
    const double m0 = dist_sum[0] / votes[0];
    const double m1 = dist_sum[1] / votes[1];
    if (m0 != m1)
        return m0 < m1 ? Label::passenger_car : Label::truck;
    const auto trucks = std::count(model.y.begin(), model.y.end(), Label::truck);
    const auto cars = static_cast<std::ptrdiff_t>(model.y.size()) - trucks;
    return trucks > cars ? Label::truck : Label::passenger_car;
}

// ---------------------------------------------------------------------------

double Kernel::operator()(std::span<const double> a, std::span<const double> b) const {
    if (kind == KernelKind::linear)
        return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    return std::exp(-gamma * squared_distance(a, b));
}

double SvmModel::decision(std::span<const double> query) const {
    const Row q = stats.apply(query);
    double f = bias;
    for (std::size_t i = 0; i < support_vectors.size(); ++i)
        f += alpha[i] * sign[i] * kernel(support_vectors[i], q);
    return f;
}

Label svm_predict(const SvmModel& model, std::span<const double> query) {
    return model.decision(query) >= 0.0 ? Label::truck : Label::passenger_car;
}

SvmModel svm_fit(const Matrix& x_raw, const std::vector<Label>& labels, const SvmParams& params) {
    check_matrix(x_raw, labels);
    if (!(params.c > 0.0))
        throw ConfigError("SVM regularization C must be positive");
    if (!(params.tolerance > 0.0))
        throw ConfigError("SVM tolerance must be positive");
    const auto trucks = std::count(labels.begin(), labels.end(), Label::truck);
    if (trucks == 0 || trucks == static_cast<std::ptrdiff_t>(labels.size()))
        throw TrainingError("SVM training needs both classes");

    SvmModel model;
    model.kernel = params.kernel;
    if (model.kernel.kind == KernelKind::rbf && !(model.kernel.gamma > 0.0))
        model.kernel.gamma = 1.0 / static_cast<double>(x_raw.front().size());
    model.c = params.c;
    model.tolerance = params.tolerance;
    model.stats = Standardizer::fit(x_raw);

    const std::size_t n = x_raw.size();
    Matrix x;
    x.reserve(n);
    for (const auto& r : x_raw)
        x.push_back(model.stats.apply(r));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = sign_of(labels[i]);

    std::vector<double> kmat(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            kmat[i * n + j] = kmat[j * n + i] = model.kernel(x[i], x[j]);
    auto K = [&](std::size_t i, std::size_t j) { return kmat[i * n + j]; };

    // Dual: min 1/2 a'Qa - e'a, Q_ij = y_i y_j K_ij, 0 <= a <= C, y'a = 0.
    const double C = params.c;
    constexpr double tau = 1e-12;
    std::vector<double> a(n, 0.0), g(n, -1.0);
    auto upper = [&](std::size_t i) { return a[i] >= C; };
    auto lower = [&](std::size_t i) { return a[i] <= 0.0; };

    long iter = 0;
    double gap = std::numeric_limits<double>::infinity();
    for (;;) {
        // Second-order working set selection.
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t ii = -1;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] > 0 ? !upper(t) : !lower(t)) {
                const double v = -y[t] * g[t];
                if (v >= gmax) {
                    gmax = v;
                    ii = static_cast<std::ptrdiff_t>(t);
                }
            }
        }
        std::ptrdiff_t jj = -1;
        double best = std::numeric_limits<double>::infinity();
        if (ii >= 0) {
            const auto i = static_cast<std::size_t>(ii);
            for (std::size_t t = 0; t < n; ++t) {
                if (!(y[t] > 0 ? !lower(t) : !upper(t)))
                    continue;
                const double v = y[t] * g[t]; // = -(-y_t g_t)
                gmax2 = std::max(gmax2, v);
                const double diff = gmax + v;
                if (diff > 0.0) {
                    double quad = K(i, i) + K(t, t) - 2.0 * K(i, t);
                    if (quad <= 0.0)
                        quad = tau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= best) {
                        best = obj;
                        jj = static_cast<std::ptrdiff_t>(t);
                    }
                }
            }
        }
        gap = gmax + gmax2;
        if (gap < params.tolerance || jj < 0)
            break;
        if (iter >= params.max_iterations)
            throw TrainingError(fmt::format(
                "SVM solver did not converge after {} iterations (optimality gap {:.3g}, tolerance {:.3g}, n = {})",
                iter, gap, params.tolerance, n));
        ++iter;

        const auto i = static_cast<std::size_t>(ii);
        const auto j = static_cast<std::size_t>(jj);
        const double old_i = a[i], old_j = a[j];
        if (y[i] != y[j]) {
            double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
            if (quad <= 0.0)
                quad = tau;
            const double delta = (-g[i] - g[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0.0) {
                if (a[j] < 0.0) {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if (a[i] < 0.0) {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if (diff > 0.0) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = C - diff;
                }
            } else if (a[j] > C) {
                a[j] = C;
                a[i] = C + diff;
            }
        } else {
            double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
            if (quad <= 0.0)
                quad = tau;
            const double delta = (g[i] - g[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > C) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = sum - C;
                }
            } else if (a[j] < 0.0) {
                a[j] = 0.0;
                a[i] = sum;
            }
            if (sum > C) {
                if (a[j] > C) {
                    a[j] = C;
                    a[i] = sum - C;
                }
            } else if (a[i] < 0.0) {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        const double di = a[i] - old_i, dj = a[j] - old_j;
        for (std::size_t t = 0; t < n; ++t)
            g[t] += y[t] * (y[i] * K(t, i) * di + y[j] * K(t, j) * dj);
    }

    // Bias from the free vectors, else the middle of the feasible interval.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    int free_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double yg = y[i] * g[i];
        if (upper(i)) {
            if (y[i] < 0)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else if (lower(i)) {
            if (y[i] > 0)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else {
            free_sum += yg;
            ++free_count;
        }
    }
    const double rho = free_count > 0 ? free_sum / free_count : 0.5 * (ub + lb);
    model.bias = -rho;
    model.iterations = iter;

    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] > 0.0) {
            model.support_indices.push_back(i);
            model.support_vectors.push_back(x[i]);
            model.alpha.push_back(a[i]);
            model.sign.push_back(static_cast<int>(y[i]));
        }
    }

    const auto residuals = svm_kkt_residuals(model, x_raw, labels);
    model.max_kkt_residual = *std::max_element(residuals.begin(), residuals.end());
    if (model.max_kkt_residual > params.tolerance)
        throw TrainingError(fmt::format("SVM fit violates KKT conditions by {:.3g} (tolerance {:.3g})",
                                        model.max_kkt_residual, params.tolerance));
    return model;
}

std::vector<double> svm_kkt_residuals(const SvmModel& model, const Matrix& x,
                                      const std::vector<Label>& y) {
    check_matrix(x, y);
    std::vector<double> alpha(x.size(), 0.0);
    for (std::size_t s = 0; s < model.support_indices.size(); ++s) {
        const std::size_t idx = model.support_indices[s];
        if (idx >= x.size())
            throw InputError("support vector index outside the training set");
        alpha[idx] = model.alpha[s];
    }
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double margin = sign_of(y[i]) * model.decision(x[i]);
        if (alpha[i] <= 0.0)
            out[i] = std::max(0.0, 1.0 - margin);
        else if (alpha[i] >= model.c)
            out[i] = std::max(0.0, margin - 1.0);
        else
            out[i] = std::abs(margin - 1.0);
    }
    return out;
}

// ---------------------------------------------------------------------------

LengthThresholdModel length_threshold_fit(std::span<const double> lengths,
                                          const std::vector<Label>& y) {
    if (lengths.size() != y.size() || lengths.empty())
        throw InputError("length classifier needs one label per length");
    const auto trucks = std::count(y.begin(), y.end(), Label::truck);
    if (trucks == 0 || trucks == static_cast<std::ptrdiff_t>(y.size()))
        throw TrainingError("length classifier needs both classes");

    std::vector<double> sorted(lengths.begin(), lengths.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    auto accuracy = [&](double thr) {
        std::size_t ok = 0;
        for (std::size_t i = 0; i < lengths.size(); ++i)
            ok += ((lengths[i] >= thr) == (y[i] == Label::truck)) ? 1 : 0;
        return static_cast<double>(ok) / static_cast<double>(lengths.size());
    };
    LengthThresholdModel best;
    best.training_accuracy = -1.0;
    // Ascending scan with a strict improvement test keeps the lowest threshold on ties.
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const double thr = 0.5 * (sorted[i] + sorted[i + 1]);
        const double acc = accuracy(thr);
        if (acc > best.training_accuracy) {
            best.training_accuracy = acc;
            best.threshold = thr;
        }
    }
    if (best.training_accuracy < 0.0) { // all lengths equal
        best.threshold = sorted.front();
        best.training_accuracy = accuracy(best.threshold);
    }
    return best;
}

Label length_threshold_predict(const LengthThresholdModel& model, double length) {
    return length >= model.threshold ? Label::truck : Label::passenger_car;
}

Label length_only_classify(std::span<const double> lengths, const std::vector<Label>& y,
                           double query) {
    return length_threshold_predict(length_threshold_fit(lengths, y), query);
}

// ---------------------------------------------------------------------------

std::string_view to_string(LearnerKind kind) {
    switch (kind) {
    case LearnerKind::knn:
        return "knn";
    case LearnerKind::svm:
        return "svm";
    case LearnerKind::length_threshold:
        return "length-threshold";
    }
    return "?";
}

LearnerKind parse_learner(std::string_view name) {
    if (name == "knn")
        return LearnerKind::knn;
    if (name == "svm")
        return LearnerKind::svm;
    if (name == "length-threshold" || name == "threshold")
        return LearnerKind::length_threshold;
    throw ConfigError(fmt::format("unknown learner '{}' (knn, svm, length-threshold)", name));
}

LearnerKind Model::kind() const {
    switch (impl_.index()) {
    case 0:
        return LearnerKind::knn;
    case 1:
        return LearnerKind::svm;
    default:
        return LearnerKind::length_threshold;
    }
}

Label Model::predict(const FeatureVector& row) const {
    if (const auto* m = std::get_if<LengthThresholdModel>(&impl_))
        return length_threshold_predict(*m, row.est_length);
    check_query(dimension_, row.values.size());
    if (const auto* m = std::get_if<KnnModel>(&impl_))
        return knn_predict(*m, row.values);
    return svm_predict(std::get<SvmModel>(impl_), row.values);
}

Model fit_model(const LearnerSpec& spec, std::span<const FeatureVector> rows) {
    if (rows.empty())
        throw InputError("no training rows");
    std::vector<Label> y;
    y.reserve(rows.size());
    for (const auto& r : rows)
        y.push_back(r.label());
    if (spec.kind == LearnerKind::length_threshold) {
        std::vector<double> lengths;
        for (const auto& r : rows)
            lengths.push_back(r.est_length);
        return Model(length_threshold_fit(lengths, y), 1);
    }
    Matrix x;
    x.reserve(rows.size());
    for (const auto& r : rows)
        x.push_back(r.values);
    check_matrix(x, y);
    const std::size_t d = x.front().size();
    if (spec.kind == LearnerKind::knn)
        return Model(knn_fit(x, y, spec.k), d);
    return Model(svm_fit(x, y, spec.svm), d);
}

namespace {

using codec::Json;

Json stats_json(const Standardizer& s) { return {{"mean", s.mean}, {"scale", s.scale}}; }

Standardizer stats_from(const Json& j) {
    Standardizer s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.scale = j.at("scale").get<std::vector<double>>();
    if (s.mean.size() != s.scale.size())
        throw InputError("model standardization vectors differ in size");
    return s;
}

Json labels_json(const std::vector<Label>& y) {
    Json out = Json::array();
    for (Label l : y)
        out.push_back(std::string(to_string(l)));
    return out;
}

constexpr int model_format_version = 1;

} // namespace

void save_model(std::ostream& out, const Model& model) {
    Json j;
    j["format"] = "rfbarrier-model";
    j["version"] = model_format_version;
    j["learner"] = std::string(to_string(model.kind()));
    j["dimension"] = model.dimension();
    if (const auto* m = std::get_if<KnnModel>(&model.impl())) {
        j["k"] = m->k;
        j["stats"] = stats_json(m->stats);
        j["x"] = m->x;
        j["y"] = labels_json(m->y);
    } else if (const auto* m = std::get_if<SvmModel>(&model.impl())) {
        j["kernel"] = m->kernel.kind == KernelKind::rbf ? "rbf" : "linear";
        j["gamma"] = m->kernel.gamma;
        j["c"] = m->c;
        j["tolerance"] = m->tolerance;
        j["bias"] = m->bias;
        j["iterations"] = m->iterations;
        j["max_kkt_residual"] = m->max_kkt_residual;
        j["stats"] = stats_json(m->stats);
        j["support_indices"] = m->support_indices;
        j["alpha"] = m->alpha;
        j["sign"] = m->sign;
        j["support_vectors"] = m->support_vectors;
    } else {
        const auto& t = std::get<LengthThresholdModel>(model.impl());
        j["threshold"] = t.threshold;
        j["training_accuracy"] = t.training_accuracy;
    }
    out << codec::dump17(j) << '\n';
}

Model load_model(std::istream& in) {
    Json j;
    try {
        j = Json::parse(in);
    } catch (const std::exception& e) {
        throw InputError(fmt::format("model file is not valid JSON: {}", e.what()));
    }
    try {
        if (j.at("format").get<std::string>() != "rfbarrier-model")
            throw InputError("not an rfbarrier model file");
        const int version = j.at("version").get<int>();
        if (version != model_format_version)
            throw InputError(fmt::format("unsupported model version {}", version));
        const auto kind = parse_learner(j.at("learner").get<std::string>());
        const auto dim = j.at("dimension").get<std::size_t>();
        if (kind == LearnerKind::knn) {
            KnnModel m;
            m.k = j.at("k").get<int>();
            m.stats = stats_from(j.at("stats"));
            m.x = j.at("x").get<Matrix>();
            for (const auto& l : j.at("y"))
                m.y.push_back(parse_label(l.get<std::string>()));
            if (m.x.size() != m.y.size() || m.k < 1 || static_cast<std::size_t>(m.k) > m.x.size())
                throw InputError("inconsistent k-NN model");
            return Model(std::move(m), dim);
        }
        if (kind == LearnerKind::svm) {
            SvmModel m;
            const auto kname = j.at("kernel").get<std::string>();
            if (kname != "rbf" && kname != "linear")
                throw InputError(fmt::format("unknown kernel '{}'", kname));
            m.kernel.kind = kname == "rbf" ? KernelKind::rbf : KernelKind::linear;
            m.kernel.gamma = j.at("gamma").get<double>();
            m.c = j.at("c").get<double>();
            m.tolerance = j.at("tolerance").get<double>();
            m.bias = j.at("bias").get<double>();
            m.iterations = j.at("iterations").get<long>();
            m.max_kkt_residual = j.at("max_kkt_residual").get<double>();
            m.stats = stats_from(j.at("stats"));
            m.support_indices = j.at("support_indices").get<std::vector<std::size_t>>();
            m.alpha = j.at("alpha").get<std::vector<double>>();
            m.sign = j.at("sign").get<std::vector<int>>();
            m.support_vectors = j.at("support_vectors").get<Matrix>();
            const std::size_t s = m.alpha.size();
            if (m.sign.size() != s || m.support_vectors.size() != s || m.support_indices.size() != s)
                throw InputError("inconsistent SVM model");
            return Model(std::move(m), dim);
        }
        LengthThresholdModel t;
        t.threshold = j.at("threshold").get<double>();
        t.training_accuracy = j.at("training_accuracy").get<double>();
        return Model(t, dim);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw InputError(fmt::format("malformed model file: {}", e.what()));
    }
}

// ---------------------------------------------------------------------------

double EvaluationReport::overall_percent() const { return percent(correct, total); }

double percent(std::size_t correct, std::size_t total) {
    if (total == 0)
        throw InputError("rate of an empty set");
    return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

std::string format_percent(double value) { return fmt::format("{:.2f}", value); }

EvaluationReport tally(std::span<const VehicleType> types, std::span<const Label> predicted) {
    if (types.size() != predicted.size())
        throw InputError("one prediction per test row is required");
    if (types.empty())
        throw InputError("test set is empty");
    EvaluationReport r;
    std::array<TypeRate, 6> by_type{};
    for (std::size_t i = 0; i < types.size(); ++i) {
        const Label truth = label_of(types[i]);
        const bool ok = truth == predicted[i];
        ++r.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted[i])];
        auto& t = by_type[static_cast<std::size_t>(types[i])];
        t.type = types[i];
        ++t.samples;
        t.correct += ok ? 1 : 0;
        r.correct += ok ? 1 : 0;
    }
    r.total = types.size();
    for (auto type : all_vehicle_types)
        if (by_type[static_cast<std::size_t>(type)].samples > 0)
            r.per_type.push_back(by_type[static_cast<std::size_t>(type)]);
    return r;
}

EvaluationReport evaluate(const Model& model, std::span<const FeatureVector> test) {
    std::vector<VehicleType> types;
    std::vector<Label> predicted;
    for (const auto& row : test) {
        types.push_back(row.type);
        predicted.push_back(model.predict(row));
    }
    return tally(types, predicted);
}

std::pair<double, double> mean_std(std::span<const double> values) {
    if (values.size() < 2)
        throw InputError("mean and sample deviation need at least two values");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::uint64_t>> assign_folds(std::span<const FeatureVector> rows, int folds,
                                                     std::uint64_t seed, bool stratified) {
    if (folds < 2)
        throw ConfigError("cross-validation needs at least two folds");
    if (rows.size() < static_cast<std::size_t>(folds))
        throw InputError(fmt::format("{} rows cannot fill {} folds", rows.size(), folds));

    std::map<std::uint64_t, Label> by_id;
    for (const auto& r : rows)
        if (!by_id.emplace(r.event_id, r.label()).second)
            throw InputError(fmt::format("duplicate event id {}", r.event_id));

    std::vector<std::vector<std::uint64_t>> groups(stratified ? 2 : 1);
    for (const auto& [id, label] : by_id)
        groups[stratified ? static_cast<std::size_t>(label) : 0].push_back(id);

    std::vector<std::vector<std::uint64_t>> out(static_cast<std::size_t>(folds));
    std::uint64_t state = splitmix64(seed ^ 0x5eed'f01d'ca11'ab1eULL);
    std::size_t next = 0;
    for (auto& g : groups) {
        // Fisher-Yates with a fixed generator keeps fold membership portable.
        for (std::size_t i = g.size(); i > 1; --i) {
            state = splitmix64(state);
            std::swap(g[i - 1], g[state % i]);
        }
        for (auto id : g)
            out[next++ % out.size()].push_back(id);
    }
    for (auto& f : out)
        std::sort(f.begin(), f.end());
    return out;
}

CvSummary cross_validate(std::span<const FeatureVector> rows, const LearnerSpec& spec, int folds,
                         std::uint64_t seed, bool stratified, unsigned jobs) {
    CvSummary summary;
    summary.fold_event_ids = assign_folds(rows, folds, seed, stratified);

    std::vector<FeatureVector> sorted(rows.begin(), rows.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const FeatureVector& a, const FeatureVector& b) { return a.event_id < b.event_id; });

    const std::size_t nf = summary.fold_event_ids.size();
    summary.fold_accuracies.assign(nf, 0.0);
    summary.train_sizes.assign(nf, 0);
    std::vector<std::exception_ptr> errors(nf);

    auto run_fold = [&](std::size_t f) {
        try {
            const auto& ids = summary.fold_event_ids[f];
            std::vector<FeatureVector> train, test;
            for (const auto& r : sorted)
                (std::binary_search(ids.begin(), ids.end(), r.event_id) ? test : train).push_back(r);
            const Model model = fit_model(spec, train);
            summary.train_sizes[f] = train.size();
            summary.fold_accuracies[f] =
                static_cast<double>(evaluate(model, test).correct) / static_cast<double>(test.size());
        } catch (...) {
            errors[f] = std::current_exception();
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(nf)));
    if (workers == 1) {
        for (std::size_t f = 0; f < nf; ++f)
            run_fold(f);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t f; (f = next.fetch_add(1)) < nf;)
                    run_fold(f);
            });
        for (auto& t : pool)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    const auto [mean, sd] = mean_std(summary.fold_accuracies);
    summary.mean = mean;
    summary.sample_std = sd;
    return summary;
}

} // namespace rfbarrier
