#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nca {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) throw DimensionError("tensor extent must be positive");
        n *= e;
    }
    return n;
}

void check_finite(const std::vector<real>& v, const char* op) {
    for (real x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("non-finite value produced by ") + op);
        }
    }
}

void require_matrix(const Tensor& t, const char* name) {
    if (t.rank() != 2) throw DimensionError(std::string(name) + " must be a matrix");
}

thread_local Graph* g_active_graph = nullptr;

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    return full(std::move(shape), real(0), requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, real value, bool requires_grad) {
    Tensor t;
    t.d_ = std::make_shared<Storage>();
    std::size_t n = shape_product(shape);
    t.d_->shape = std::move(shape);
    t.d_->value.assign(n, value);
    t.d_->requires_grad = requires_grad;
    if (requires_grad) t.d_->grad.assign(n, real(0));
    return t;
}

Tensor Tensor::from_vector(std::vector<real> data, std::vector<std::size_t> shape,
                           bool requires_grad) {
    if (shape_product(shape) != data.size()) {
        throw DimensionError("from_vector: shape does not match data length");
    }
    Tensor t;
    t.d_ = std::make_shared<Storage>();
    t.d_->shape = std::move(shape);
    t.d_->value = std::move(data);
    t.d_->requires_grad = requires_grad;
    if (requires_grad) t.d_->grad.assign(t.d_->value.size(), real(0));
    return t;
}

std::vector<real>& Tensor::grad() {
    if (d_->grad.empty()) d_->grad.assign(d_->value.size(), real(0));
    return d_->grad;
}

const std::vector<real>& Tensor::grad() const {
    if (d_->grad.empty()) d_->grad.assign(d_->value.size(), real(0));
    return d_->grad;
}

void Tensor::set_requires_grad(bool v) {
    d_->requires_grad = v;
    if (v && d_->grad.empty()) d_->grad.assign(d_->value.size(), real(0));
}

void Tensor::zero_grad() {
    std::fill(d_->grad.begin(), d_->grad.end(), real(0));
}

real Tensor::item() const {
    if (size() != 1) throw ContractError("item() requires a scalar tensor");
    return d_->value[0];
}

real Tensor::at(std::size_t r, std::size_t c) const {
    if (rank() != 2 || r >= dim(0) || c >= dim(1)) {
        throw DimensionError("at(): index out of range");
    }
    return d_->value[r * dim(1) + c];
}

// ---- Graph ----------------------------------------------------------------

Graph::Scope::Scope(Graph& g) : prev_(g_active_graph) { g_active_graph = &g; }
Graph::Scope::~Scope() { g_active_graph = prev_; }

Graph* Graph::active() { return g_active_graph; }

void Graph::record(Tensor output, std::function<void()> backward_fn) {
    ops_.push_back(Op{std::move(output), std::move(backward_fn)});
}

void Graph::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ContractError("backward: loss must be a scalar tensor");
    }
    loss.d_->grad.assign(1, real(1));
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        if (it->output.has_grad()) it->backward_fn();
    }
}

// ---- op helpers -------------------------------------------------------------

namespace {

bool track(std::initializer_list<const Tensor*> inputs) {
    if (!g_active_graph) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

Tensor make_out(std::vector<std::size_t> shape, bool tracked) {
    Tensor out = Tensor::zeros(std::move(shape));
    if (tracked) out.set_requires_grad(true);
    return out;
}

}  // namespace

// ---- matmul family ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul lhs");
    require_matrix(b, "matmul rhs");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) throw DimensionError("matmul: inner dimensions disagree");

    bool tracked = track({&a, &b});
    Tensor out = make_out({m, n}, tracked);
    const real* A = a.data().data();
    const real* B = b.data().data();
    real* C = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const real aip = A[i * k + p];
            if (aip == real(0)) continue;
            const real* Bp = B + p * n;
            real* Ci = C + i * n;
            for (std::size_t j = 0; j < n; ++j) Ci[j] += aip * Bp[j];
        }
    }
    check_finite(out.data(), "matmul");
    if (tracked) {
        Tensor ac = a, bc = b, oc = out;
        g_active_graph->record(out, [ac, bc, oc, m, k, n]() mutable {
            const real* dC = oc.grad().data();
            if (ac.requires_grad()) {
                real* dA = ac.grad().data();
                const real* B = bc.data().data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        real acc = 0;
                        const real* dCi = dC + i * n;
                        const real* Bp = B + p * n;
                        for (std::size_t j = 0; j < n; ++j) acc += dCi[j] * Bp[j];
                        dA[i * k + p] += acc;
                    }
            }
            if (bc.requires_grad()) {
                real* dB = bc.grad().data();
                const real* A = ac.data().data();
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t i = 0; i < m; ++i) {
                        const real aip = A[i * k + p];
                        if (aip == real(0)) continue;
                        const real* dCi = dC + i * n;
                        real* dBp = dB + p * n;
                        for (std::size_t j = 0; j < n; ++j) dBp[j] += aip * dCi[j];
                    }
            }
        });
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_nt lhs");
    require_matrix(b, "matmul_nt rhs");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k) throw DimensionError("matmul_nt: inner dimensions disagree");

    bool tracked = track({&a, &b});
    Tensor out = make_out({m, n}, tracked);
    const real* A = a.data().data();
    const real* B = b.data().data();
    real* C = out.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            real acc = 0;
            const real* Ai = A + i * k;
            const real* Bj = B + j * k;
            for (std::size_t p = 0; p < k; ++p) acc += Ai[p] * Bj[p];
            C[i * n + j] = acc;
        }
    check_finite(out.data(), "matmul_nt");
    if (tracked) {
        Tensor ac = a, bc = b, oc = out;
        g_active_graph->record(out, [ac, bc, oc, m, k, n]() mutable {
            const real* dC = oc.grad().data();
            if (ac.requires_grad()) {
                real* dA = ac.grad().data();
                const real* B = bc.data().data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const real g = dC[i * n + j];
                        if (g == real(0)) continue;
                        const real* Bj = B + j * k;
                        real* dAi = dA + i * k;
                        for (std::size_t p = 0; p < k; ++p) dAi[p] += g * Bj[p];
                    }
            }
            if (bc.requires_grad()) {
                real* dB = bc.grad().data();
                const real* A = ac.data().data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const real g = dC[i * n + j];
                        if (g == real(0)) continue;
                        const real* Ai = A + i * k;
                        real* dBj = dB + j * k;
                        for (std::size_t p = 0; p < k; ++p) dBj[p] += g * Ai[p];
                    }
            }
        });
    }
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_tn lhs");
    require_matrix(b, "matmul_tn rhs");
    const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) throw DimensionError("matmul_tn: inner dimensions disagree");

    bool tracked = track({&a, &b});
    Tensor out = make_out({m, n}, tracked);
    const real* A = a.data().data();
    const real* B = b.data().data();
    real* C = out.data().data();
    for (std::size_t p = 0; p < k; ++p) {
        const real* Ap = A + p * m;
        const real* Bp = B + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const real api = Ap[i];
            if (api == real(0)) continue;
            real* Ci = C + i * n;
            for (std::size_t j = 0; j < n; ++j) Ci[j] += api * Bp[j];
        }
    }
    check_finite(out.data(), "matmul_tn");
    if (tracked) {
        Tensor ac = a, bc = b, oc = out;
        g_active_graph->record(out, [ac, bc, oc, m, k, n]() mutable {
            const real* dC = oc.grad().data();
            if (ac.requires_grad()) {
                real* dA = ac.grad().data();
                const real* B = bc.data().data();
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t i = 0; i < m; ++i) {
                        real acc = 0;
                        const real* dCi = dC + i * n;
                        const real* Bp = B + p * n;
                        for (std::size_t j = 0; j < n; ++j) acc += dCi[j] * Bp[j];
                        dA[p * m + i] += acc;
                    }
            }
            if (bc.requires_grad()) {
                real* dB = bc.grad().data();
                const real* A = ac.data().data();
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t i = 0; i < m; ++i) {
                        const real api = A[p * m + i];
                        if (api == real(0)) continue;
                        const real* dCi = dC + i * n;
                        real* dBp = dB + p * n;
                        for (std::size_t j = 0; j < n; ++j) dBp[j] += api * dCi[j];
                    }
            }
        });
    }
    return out;
}

// ---- elementwise ------------------------------------------------------------

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": operand shapes differ");
    }
}

template <typename Fwd, typename Bwd>
Tensor binary_ew(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
    require_same_shape(a, b, name);
    bool tracked = track({&a, &b});
    Tensor out = make_out(a.shape(), tracked);
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = fwd(a.data()[i], b.data()[i]);
    check_finite(out.data(), name);
    if (tracked) {
        Tensor ac = a, bc = b, oc = out;
        g_active_graph->record(out, [ac, bc, oc, n, bwd]() mutable {
            const real* g = oc.grad().data();
            for (std::size_t i = 0; i < n; ++i) {
                auto [da, db] = bwd(ac.data()[i], bc.data()[i], g[i]);
                if (ac.requires_grad()) ac.grad()[i] += da;
                if (bc.requires_grad()) bc.grad()[i] += db;
            }
        });
    }
    return out;
}

template <typename Fwd, typename Bwd>
Tensor unary_ew(const Tensor& a, const char* name, Fwd fwd, Bwd bwd) {
    bool tracked = track({&a});
    Tensor out = make_out(a.shape(), tracked);
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = fwd(a.data()[i]);
    check_finite(out.data(), name);
    if (tracked) {
        Tensor ac = a, oc = out;
        g_active_graph->record(out, [ac, oc, n, bwd]() mutable {
            const real* g = oc.grad().data();
            real* da = ac.grad().data();
            for (std::size_t i = 0; i < n; ++i) {
                da[i] += bwd(ac.data()[i], oc.data()[i], g[i]);
            }
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_ew(a, b, "add", [](real x, real y) { return x + y; },
                     [](real, real, real g) { return std::pair<real, real>(g, g); });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_ew(a, b, "sub", [](real x, real y) { return x - y; },
                     [](real, real, real g) { return std::pair<real, real>(g, -g); });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_ew(a, b, "mul", [](real x, real y) { return x * y; },
                     [](real x, real y, real g) { return std::pair<real, real>(g * y, g * x); });
}

Tensor square(const Tensor& a) {
    return unary_ew(a, "square", [](real x) { return x * x; },
                    [](real x, real, real g) { return real(2) * x * g; });
}

Tensor relu(const Tensor& a) {
    // subgradient at 0 is 0
    return unary_ew(a, "relu", [](real x) { return x > real(0) ? x : real(0); },
                    [](real x, real, real g) { return x > real(0) ? g : real(0); });
}

Tensor sigmoid(const Tensor& a) {
    return unary_ew(a, "sigmoid",
                    [](real x) { return real(1) / (real(1) + std::exp(-x)); },
                    [](real, real y, real g) { return g * y * (real(1) - y); });
}

Tensor tanh_op(const Tensor& a) {
    return unary_ew(a, "tanh", [](real x) { return std::tanh(x); },
                    [](real, real y, real g) { return g * (real(1) - y * y); });
}

Tensor scale(const Tensor& a, real c) {
    return unary_ew(a, "scale", [c](real x) { return c * x; },
                    [c](real, real, real g) { return c * g; });
}

Tensor add_rowvec(const Tensor& mat, const Tensor& vec) {
    require_matrix(mat, "add_rowvec lhs");
    if (vec.rank() != 1 || vec.dim(0) != mat.dim(1)) {
        throw DimensionError("add_rowvec: vector length must equal column count");
    }
    const std::size_t rows = mat.dim(0), cols = mat.dim(1);
    bool tracked = track({&mat, &vec});
    Tensor out = make_out(mat.shape(), tracked);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out.data()[r * cols + c] = mat.data()[r * cols + c] + vec.data()[c];
    check_finite(out.data(), "add_rowvec");
    if (tracked) {
        Tensor mc = mat, vc = vec, oc = out;
        g_active_graph->record(out, [mc, vc, oc, rows, cols]() mutable {
            const real* g = oc.grad().data();
            if (mc.requires_grad()) {
                real* dm = mc.grad().data();
                for (std::size_t i = 0; i < rows * cols; ++i) dm[i] += g[i];
            }
            if (vc.requires_grad()) {
                real* dv = vc.grad().data();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) dv[c] += g[r * cols + c];
            }
        });
    }
    return out;
}

Tensor softmax(const Tensor& v) {
    const std::size_t n = v.size();
    if (n == 0) throw DimensionError("softmax: empty input");
    bool tracked = track({&v});
    Tensor out = make_out(v.shape(), tracked);
    real mx = *std::max_element(v.data().begin(), v.data().end());
    real denom = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out.data()[i] = std::exp(v.data()[i] - mx);
        denom += out.data()[i];
    }
    for (std::size_t i = 0; i < n; ++i) out.data()[i] /= denom;
    check_finite(out.data(), "softmax");
    if (tracked) {
        Tensor vc = v, oc = out;
        g_active_graph->record(out, [vc, oc, n]() mutable {
            const real* y = oc.data().data();
            const real* g = oc.grad().data();
            real dot = 0;
            for (std::size_t i = 0; i < n; ++i) dot += g[i] * y[i];
            real* dv = vc.grad().data();
            for (std::size_t i = 0; i < n; ++i) dv[i] += y[i] * (g[i] - dot);
        });
    }
    return out;
}

Tensor sum(const Tensor& a) {
    bool tracked = track({&a});
    Tensor out = make_out({1}, tracked);
    out.data()[0] = std::accumulate(a.data().begin(), a.data().end(), real(0));
    check_finite(out.data(), "sum");
    if (tracked) {
        Tensor ac = a, oc = out;
        g_active_graph->record(out, [ac, oc]() mutable {
            const real g = oc.grad()[0];
            real* da = ac.grad().data();
            for (std::size_t i = 0; i < ac.size(); ++i) da[i] += g;
        });
    }
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_matrix(a, "concat_cols lhs");
    require_matrix(b, "concat_cols rhs");
    if (a.dim(0) != b.dim(0)) throw DimensionError("concat_cols: row counts differ");
    const std::size_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    bool tracked = track({&a, &b});
    Tensor out = make_out({rows, ca + cb}, tracked);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(a.data().data() + r * ca, ca, out.data().data() + r * (ca + cb));
        std::copy_n(b.data().data() + r * cb, cb, out.data().data() + r * (ca + cb) + ca);
    }
    if (tracked) {
        Tensor ac = a, bc = b, oc = out;
        g_active_graph->record(out, [ac, bc, oc, rows, ca, cb]() mutable {
            const real* g = oc.grad().data();
            for (std::size_t r = 0; r < rows; ++r) {
                if (ac.requires_grad()) {
                    real* da = ac.grad().data() + r * ca;
                    const real* gr = g + r * (ca + cb);
                    for (std::size_t c = 0; c < ca; ++c) da[c] += gr[c];
                }
                if (bc.requires_grad()) {
                    real* db = bc.grad().data() + r * cb;
                    const real* gr = g + r * (ca + cb) + ca;
                    for (std::size_t c = 0; c < cb; ++c) db[c] += gr[c];
                }
            }
        });
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw DimensionError("concat_rows: no rows");
    const std::size_t cols = rows[0].rank() == 2 ? rows[0].dim(1) : rows[0].dim(0);
    bool tracked = false;
    std::size_t total = 0;
    for (const Tensor& r : rows) {
        if (r.rank() != 2 || r.dim(1) != cols) {
            throw DimensionError("concat_rows: inconsistent row shapes");
        }
        total += r.dim(0);
        if (g_active_graph && r.requires_grad()) tracked = true;
    }
    Tensor out = make_out({total, cols}, tracked);
    std::size_t off = 0;
    for (const Tensor& r : rows) {
        std::copy_n(r.data().data(), r.size(), out.data().data() + off);
        off += r.size();
    }
    if (tracked) {
        std::vector<Tensor> rc = rows;
        Tensor oc = out;
        g_active_graph->record(out, [rc, oc]() mutable {
            const real* g = oc.grad().data();
            std::size_t off = 0;
            for (Tensor& r : rc) {
                if (r.requires_grad()) {
                    real* dr = r.grad().data();
                    for (std::size_t i = 0; i < r.size(); ++i) dr[i] += g[off + i];
                }
                off += r.size();
            }
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
    require_matrix(a, "slice_rows input");
    if (start + count > a.dim(0)) throw DimensionError("slice_rows: range out of bounds");
    const std::size_t cols = a.dim(1);
    bool tracked = track({&a});
    Tensor out = make_out({count, cols}, tracked);
    std::copy_n(a.data().data() + start * cols, count * cols, out.data().data());
    if (tracked) {
        Tensor ac = a, oc = out;
        g_active_graph->record(out, [ac, oc, start, count, cols]() mutable {
            const real* g = oc.grad().data();
            real* da = ac.grad().data() + start * cols;
            for (std::size_t i = 0; i < count * cols; ++i) da[i] += g[i];
        });
    }
    return out;
}

Tensor cross_entropy_with_logits(const Tensor& logits, std::size_t label) {
    require_matrix(logits, "cross_entropy logits");
    const std::size_t T = logits.dim(0), C = logits.dim(1);
    if (label >= C) throw ContractError("cross_entropy: label out of range");
    bool tracked = track({&logits});
    Tensor out = make_out({1}, tracked);
    real total = 0;
    for (std::size_t t = 0; t < T; ++t) {
        const real* z = logits.data().data() + t * C;
        real mx = *std::max_element(z, z + C);
        real lse = 0;
        for (std::size_t c = 0; c < C; ++c) lse += std::exp(z[c] - mx);
        total += mx + std::log(lse) - z[label];
    }
    out.data()[0] = total;
    check_finite(out.data(), "cross_entropy_with_logits");
    if (tracked) {
        Tensor lc = logits, oc = out;
        g_active_graph->record(out, [lc, oc, T, C, label]() mutable {
            const real g = oc.grad()[0];
            real* dz = lc.grad().data();
            for (std::size_t t = 0; t < T; ++t) {
                const real* z = lc.data().data() + t * C;
                real mx = *std::max_element(z, z + C);
                real denom = 0;
                for (std::size_t c = 0; c < C; ++c) denom += std::exp(z[c] - mx);
                for (std::size_t c = 0; c < C; ++c) {
                    real p = std::exp(z[c] - mx) / denom;
                    dz[t * C + c] += g * (p - (c == label ? real(1) : real(0)));
                }
            }
        });
    }
    return out;
}

Tensor overlap_add(const Tensor& segments, std::size_t hop, std::size_t out_len) {
    require_matrix(segments, "overlap_add segments");
    if (hop == 0) throw DimensionError("overlap_add: hop must be positive");
    const std::size_t T = segments.dim(0), L = segments.dim(1);
    bool tracked = track({&segments});
    Tensor out = make_out({out_len}, tracked);
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t base = t * hop;
        const real* seg = segments.data().data() + t * L;
        for (std::size_t j = 0; j < L && base + j < out_len; ++j) {
            out.data()[base + j] += seg[j];
        }
    }
    check_finite(out.data(), "overlap_add");
    if (tracked) {
        Tensor sc = segments, oc = out;
        g_active_graph->record(out, [sc, oc, hop, out_len, T, L]() mutable {
            const real* g = oc.grad().data();
            real* ds = sc.grad().data();
            for (std::size_t t = 0; t < T; ++t) {
                const std::size_t base = t * hop;
                for (std::size_t j = 0; j < L && base + j < out_len; ++j) {
                    ds[t * L + j] += g[base + j];
                }
            }
        });
    }
    return out;
}

}  // namespace nca
