#include "matmuon/problems.hpp"

#include <charconv>
#include <cmath>
#include <cstring>

#include "matmuon/prng.hpp"

namespace matmuon::problems {

namespace {

void check_dims(const ProblemSpec& spec, const Matrix& w, const Sample& s) {
    if (w.rows() != spec.m || w.cols() != spec.n)
        throw ShapeError("problem: parameter matrix does not match spec dimensions");
    if (static_cast<int>(s.x.size()) != spec.n || static_cast<int>(s.y.size()) != spec.m)
        throw ShapeError("problem: sample dimensions do not match spec");
}

// residual r = model(w x) - y; also returns the activation for the chain rule
void forward(const ProblemSpec& spec, const Matrix& w, const Sample& s,
             std::vector<double>& pred, std::vector<double>& resid) {
    pred.assign(spec.m, 0.0);
    for (int i = 0; i < spec.m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < spec.n; ++j) acc += w(i, j) * s.x[j];
        pred[i] = (spec.kind == ProblemKind::TanhRegression) ? std::tanh(acc) : acc;
    }
    resid.assign(spec.m, 0.0);
    for (int i = 0; i < spec.m; ++i) resid[i] = pred[i] - s.y[i];
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace

Matrix make_ground_truth(int m, int n, std::uint64_t gt_seed, double scale) {
    Xoshiro256pp rng(gt_seed);
    Matrix out(m, n);
    for (double& v : out.data()) v = scale * rng.normal();
    return out;
}

double loss(const ProblemSpec& spec, const Matrix& w, const Sample& s) {
    check_dims(spec, w, s);
    std::vector<double> pred, resid;
    forward(spec, w, s, pred, resid);
    double acc = 0.0;
    for (double r : resid) acc += r * r;
    return 0.5 * acc;
}

Matrix grad(const ProblemSpec& spec, const Matrix& w, const Sample& s) {
    check_dims(spec, w, s);
    std::vector<double> pred, resid;
    forward(spec, w, s, pred, resid);
    Matrix out(spec.m, spec.n);
    for (int i = 0; i < spec.m; ++i) {
        double scale = resid[i];
        if (spec.kind == ProblemKind::TanhRegression)
            scale *= 1.0 - pred[i] * pred[i];
        for (int j = 0; j < spec.n; ++j) out(i, j) = scale * s.x[j];
    }
    return out;
}

std::pair<double, Matrix> empirical_loss_and_grad(const ProblemSpec& spec, const Matrix& w,
                                                  const Dataset& d) {
    if (d.samples.empty()) throw InvalidInput("empirical_loss_and_grad: empty dataset");
    double total = 0.0;
    Matrix g(spec.m, spec.n);
    for (const Sample& s : d.samples) {
        total += loss(spec, w, s);
        const Matrix gi = grad(spec, w, s);
        auto gd = g.data();
        auto gid = gi.data();
        for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += gid[i];
    }
    const double inv = 1.0 / static_cast<double>(d.samples.size());
    for (double& v : g.data()) v *= inv;
    return {total * inv, std::move(g)};
}

namespace {

Sample draw_sample(const ProblemSpec& spec, Xoshiro256pp& rng, std::int64_t id) {
    Sample s;
    s.id = id;
    s.x.resize(spec.n);
    for (double& v : s.x) v = rng.normal();
    s.y.resize(spec.m);
    for (int i = 0; i < spec.m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < spec.n; ++j) acc += spec.ground_truth(i, j) * s.x[j];
        if (spec.kind == ProblemKind::TanhRegression) acc = std::tanh(acc);
        s.y[i] = acc;
    }
    for (int i = 0; i < spec.m; ++i) s.y[i] += spec.noise_sigma * rng.normal();
    return s;
}

} // namespace

Dataset generate_dataset(const ProblemSpec& spec, std::int64_t n_samples, std::uint64_t seed) {
    if (n_samples < 2) throw InvalidInput("generate_dataset: need at least 2 samples");
    if (spec.ground_truth.rows() != spec.m || spec.ground_truth.cols() != spec.n)
        throw ShapeError("generate_dataset: ground truth does not match spec dimensions");
    Dataset d;
    d.seed = seed;
    d.samples.reserve(static_cast<std::size_t>(n_samples));
    Xoshiro256pp rng(seed);
    for (std::int64_t i = 0; i < n_samples; ++i)
        d.samples.push_back(draw_sample(spec, rng, i));
    return d;
}

Sample make_replacement_sample(const ProblemSpec& spec, std::uint64_t replacement_seed,
                               std::int64_t id) {
    Xoshiro256pp rng(replacement_seed);
    return draw_sample(spec, rng, id);
}

Dataset NeighborSpec::apply(const Dataset& base) const {
    if (replace_index < 0 || replace_index >= static_cast<std::int64_t>(base.samples.size()))
        throw InvalidInput("neighbor: replace_index out of range");
    const Sample& old = base.samples[static_cast<std::size_t>(replace_index)];
    if (replacement.x.size() != old.x.size() || replacement.y.size() != old.y.size())
        throw ShapeError("neighbor: replacement sample dimensions differ from base");
    Dataset out = base;
    Sample r = replacement;
    r.id = replace_index;
    out.samples[static_cast<std::size_t>(replace_index)] = std::move(r);
    return out;
}

std::vector<std::int64_t> sample_index_sequence(std::uint64_t seed, std::int64_t n_samples,
                                                std::int64_t steps) {
    if (steps < 1) throw InvalidInput("sample_index_sequence: steps must be >= 1");
    if (n_samples < 1) throw InvalidInput("sample_index_sequence: n_samples must be >= 1");
    Xoshiro256pp rng(seed);
    std::vector<std::int64_t> out(static_cast<std::size_t>(steps));
    for (auto& v : out)
        v = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(n_samples)));
    return out;
}

void write_dataset_csv(const Dataset& d, std::ostream& out) {
    if (d.samples.empty()) throw InvalidInput("write_dataset_csv: empty dataset");
    const std::size_t nx = d.samples.front().x.size();
    const std::size_t ny = d.samples.front().y.size();
    out << "id";
    for (std::size_t j = 0; j < nx; ++j) out << ",x" << j;
    for (std::size_t i = 0; i < ny; ++i) out << ",y" << i;
    out << "\n";
    for (const Sample& s : d.samples) {
        out << s.id;
        for (double v : s.x) out << ',' << format_double(v);
        for (double v : s.y) out << ',' << format_double(v);
        out << "\n";
    }
}

} // namespace matmuon::problems
