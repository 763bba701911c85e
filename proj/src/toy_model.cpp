#include "dvforge/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dvforge/rng.hpp"
#include "dvforge/util.hpp"

namespace dvforge {

namespace {

constexpr double kRmsEps = 1e-5;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

// c(m x n) = a(m x k) * b(k x n), optionally accumulating.
void mm(const double* a, int m, int k, const double* b, int n, double* c, bool acc) {
    if (!acc) {
        std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0);
    }
    for (int i = 0; i < m; ++i) {
        const double* ar = a + static_cast<std::size_t>(i) * k;
        double* cr = c + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            double av = ar[kk];
            const double* br = b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) {
                cr[j] += av * br[j];
            }
        }
    }
}

// c(k x n) += a(m x k)^T * b(m x n); the dW += x^T * dy shape.
void mm_at_b(const double* a, int m, int k, const double* b, int n, double* c) {
    for (int i = 0; i < m; ++i) {
        const double* ar = a + static_cast<std::size_t>(i) * k;
        const double* br = b + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            double av = ar[kk];
            double* cr = c + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) {
                cr[j] += av * br[j];
            }
        }
    }
}

// c(m x k) = a(m x n) * b(k x n)^T, optionally accumulating; the dx = dy * W^T shape.
void mm_a_bt(const double* a, int m, int n, const double* b, int k, double* c, bool acc) {
    for (int i = 0; i < m; ++i) {
        const double* ar = a + static_cast<std::size_t>(i) * n;
        double* cr = c + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const double* br = b + static_cast<std::size_t>(j) * n;
            double dot = 0.0;
            for (int jj = 0; jj < n; ++jj) {
                dot += ar[jj] * br[jj];
            }
            cr[j] = acc ? cr[j] + dot : dot;
        }
    }
}

void rmsnorm_rows(const Matrix& x, const Matrix& gain, int begin, int end, Matrix& out,
                  std::vector<double>& inv) {
    int d = x.cols;
    out = Matrix(x.rows, d);
    inv.assign(static_cast<std::size_t>(x.rows), 0.0);
    for (int i = begin; i < end; ++i) {
        const double* xi = x.row(i);
        double ms = 0.0;
        for (int j = 0; j < d; ++j) {
            ms += xi[j] * xi[j];
        }
        double iv = 1.0 / std::sqrt(ms / d + kRmsEps);
        inv[static_cast<std::size_t>(i)] = iv;
        double* oi = out.row(i);
        const double* g = gain.row(0);
        for (int j = 0; j < d; ++j) {
            oi[j] = xi[j] * iv * g[j];
        }
    }
}

// Adds d(loss)/d(x) for rows [begin, end) into dx and the gain gradient into dgain.
void rmsnorm_backward(const Matrix& x, const Matrix& gain, const std::vector<double>& inv,
                      const Matrix& dy, int begin, int end, Matrix& dx, Matrix& dgain) {
    int d = x.cols;
    const double* g = gain.row(0);
    double* dg = dgain.row(0);
    for (int i = begin; i < end; ++i) {
        const double* xi = x.row(i);
        const double* dyi = dy.row(i);
        double* dxi = dx.row(i);
        double iv = inv[static_cast<std::size_t>(i)];
        double t = 0.0;
        for (int j = 0; j < d; ++j) {
            t += dyi[j] * g[j] * xi[j];
        }
        double c = iv * iv * iv * t / d;
        for (int j = 0; j < d; ++j) {
            dg[j] += dyi[j] * xi[j] * iv;
            dxi[j] += iv * g[j] * dyi[j] - c * xi[j];
        }
    }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
    double phi_big = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    double phi_small = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return phi_big + x * phi_small;
}

// One pre-norm block applied in place to rows [begin, end) of x; rows outside
// the span are untouched. The mixer calls this with the visual span and no
// mask; the decoder with the full sequence and a causal mask.
void block_forward(const Block& blk, Matrix& x, int begin, int end, bool causal, int n_heads,
                   BlockCache& c) {
    int d = x.cols;
    int hd = d / n_heads;
    double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    c.x_in = x;
    rmsnorm_rows(c.x_in, blk.ln1_gain, begin, end, c.n1, c.inv1);
    int span = end - begin;
    c.q = Matrix(x.rows, d);
    c.k = Matrix(x.rows, d);
    c.v = Matrix(x.rows, d);
    mm(c.n1.row(begin), span, d, blk.wq.data.data(), d, c.q.row(begin), false);
    mm(c.n1.row(begin), span, d, blk.wk.data.data(), d, c.k.row(begin), false);
    mm(c.n1.row(begin), span, d, blk.wv.data.data(), d, c.v.row(begin), false);
    c.att = Matrix(n_heads * x.rows, x.rows);
    c.mix = Matrix(x.rows, d);
    for (int h = 0; h < n_heads; ++h) {
        int off = h * hd;
        for (int i = begin; i < end; ++i) {
            int jend = causal ? i + 1 : end;
            const double* qi = c.q.row(i) + off;
            double* att = c.att.row(h * x.rows + i);
            double maxv = -1e300;
            for (int j = begin; j < jend; ++j) {
                const double* kj = c.k.row(j) + off;
                double dot = 0.0;
                for (int a = 0; a < hd; ++a) {
                    dot += qi[a] * kj[a];
                }
                att[j] = dot * scale;
                maxv = std::max(maxv, att[j]);
            }
            double z = 0.0;
            for (int j = begin; j < jend; ++j) {
                att[j] = std::exp(att[j] - maxv);
                z += att[j];
            }
            double* mi = c.mix.row(i) + off;
            for (int j = begin; j < jend; ++j) {
                att[j] /= z;
                const double* vj = c.v.row(j) + off;
                for (int a = 0; a < hd; ++a) {
                    mi[a] += att[j] * vj[a];
                }
            }
        }
    }
    c.x_mid = c.x_in;
    mm(c.mix.row(begin), span, d, blk.wo.data.data(), d, c.x_mid.row(begin), true);
    rmsnorm_rows(c.x_mid, blk.ln2_gain, begin, end, c.n2, c.inv2);
    int hidden = blk.w1.cols;
    c.h_pre = Matrix(x.rows, hidden);
    mm(c.n2.row(begin), span, d, blk.w1.data.data(), hidden, c.h_pre.row(begin), false);
    c.h_act = Matrix(x.rows, hidden);
    for (int i = begin; i < end; ++i) {
        const double* hp = c.h_pre.row(i);
        double* ha = c.h_act.row(i);
        for (int j = 0; j < hidden; ++j) {
            ha[j] = gelu(hp[j]);
        }
    }
    x = c.x_mid;
    mm(c.h_act.row(begin), span, hidden, blk.w2.data.data(), d, x.row(begin), true);
}

// Consumes d(loss)/d(block output) and returns d(loss)/d(block input),
// accumulating parameter gradients. Rows outside the span pass through.
Matrix block_backward(const Block& blk, const BlockCache& c, const Matrix& dout, int begin,
                      int end, bool causal, int n_heads, Block& g) {
    int d = dout.cols;
    int rows = dout.rows;
    int span = end - begin;
    int hd = d / n_heads;
    int hidden = blk.w1.cols;
    double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    // MLP half: x_out = x_mid + gelu(norm2(x_mid) * w1) * w2
    Matrix dmid = dout;
    mm_at_b(c.h_act.row(begin), span, hidden, dout.row(begin), d, g.w2.data.data());
    Matrix dh_act(rows, hidden);
    mm_a_bt(dout.row(begin), span, d, blk.w2.data.data(), hidden, dh_act.row(begin), false);
    Matrix dh_pre(rows, hidden);
    for (int i = begin; i < end; ++i) {
        const double* hp = c.h_pre.row(i);
        const double* da = dh_act.row(i);
        double* dp = dh_pre.row(i);
        for (int j = 0; j < hidden; ++j) {
            dp[j] = da[j] * gelu_grad(hp[j]);
        }
    }
    mm_at_b(c.n2.row(begin), span, d, dh_pre.row(begin), hidden, g.w1.data.data());
    Matrix dn2(rows, d);
    mm_a_bt(dh_pre.row(begin), span, hidden, blk.w1.data.data(), d, dn2.row(begin), false);
    rmsnorm_backward(c.x_mid, blk.ln2_gain, c.inv2, dn2, begin, end, dmid, g.ln2_gain);

    // Attention half: x_mid = x_in + concat_heads(P_h * V_h) * wo
    Matrix dx = dmid;
    mm_at_b(c.mix.row(begin), span, d, dmid.row(begin), d, g.wo.data.data());
    Matrix dmix(rows, d);
    mm_a_bt(dmid.row(begin), span, d, blk.wo.data.data(), d, dmix.row(begin), false);
    Matrix dq(rows, d);
    Matrix dk(rows, d);
    Matrix dv(rows, d);
    std::vector<double> dp_row(static_cast<std::size_t>(rows));
    for (int h = 0; h < n_heads; ++h) {
        int off = h * hd;
        for (int i = begin; i < end; ++i) {
            int jend = causal ? i + 1 : end;
            const double* att = c.att.row(h * rows + i);
            const double* dmi = dmix.row(i) + off;
            // dP_ij and dV accumulation
            double dot_pp = 0.0;
            for (int j = begin; j < jend; ++j) {
                const double* vj = c.v.row(j) + off;
                double dp = 0.0;
                for (int a = 0; a < hd; ++a) {
                    dp += dmi[a] * vj[a];
                }
                dp_row[static_cast<std::size_t>(j)] = dp;
                dot_pp += dp * att[j];
                double* dvj = dv.row(j) + off;
                for (int a = 0; a < hd; ++a) {
                    dvj[a] += att[j] * dmi[a];
                }
            }
            // softmax jacobian, then dQ/dK
            const double* qi = c.q.row(i) + off;
            double* dqi = dq.row(i) + off;
            for (int j = begin; j < jend; ++j) {
                double ds = att[j] * (dp_row[static_cast<std::size_t>(j)] - dot_pp) * scale;
                const double* kj = c.k.row(j) + off;
                double* dkj = dk.row(j) + off;
                for (int a = 0; a < hd; ++a) {
                    dqi[a] += ds * kj[a];
                    dkj[a] += ds * qi[a];
                }
            }
        }
    }
    mm_at_b(c.n1.row(begin), span, d, dq.row(begin), d, g.wq.data.data());
    mm_at_b(c.n1.row(begin), span, d, dk.row(begin), d, g.wk.data.data());
    mm_at_b(c.n1.row(begin), span, d, dv.row(begin), d, g.wv.data.data());
    Matrix dn1(rows, d);
    mm_a_bt(dq.row(begin), span, d, blk.wq.data.data(), d, dn1.row(begin), false);
    mm_a_bt(dk.row(begin), span, d, blk.wk.data.data(), d, dn1.row(begin), true);
    mm_a_bt(dv.row(begin), span, d, blk.wv.data.data(), d, dn1.row(begin), true);
    rmsnorm_backward(c.x_in, blk.ln1_gain, c.inv1, dn1, begin, end, dx, g.ln1_gain);
    return dx;
}

Block make_block(int d) {
    Block b;
    b.ln1_gain = Matrix(1, d);
    b.wq = Matrix(d, d);
    b.wk = Matrix(d, d);
    b.wv = Matrix(d, d);
    b.wo = Matrix(d, d);
    b.ln2_gain = Matrix(1, d);
    b.w1 = Matrix(d, 4 * d);
    b.w2 = Matrix(4 * d, d);
    return b;
}

Parameters make_params(const NetDims& dims) {
    Parameters p;
    p.dims = dims;
    p.token_embed = Matrix(dims.vocab_size, dims.d_model);
    p.pos_embed = Matrix(dims.max_seq, dims.d_model);
    p.patch_w = Matrix(dims.patch_dim(), dims.d_model);
    p.patch_b = Matrix(1, dims.d_model);
    for (int i = 0; i < dims.mixer_layers; ++i) {
        p.mixer.push_back(make_block(dims.d_model));
    }
    for (int i = 0; i < dims.n_layers; ++i) {
        p.decoder.push_back(make_block(dims.d_model));
    }
    p.final_gain = Matrix(1, dims.d_model);
    p.unembed = Matrix(dims.d_model, dims.vocab_size);
    return p;
}

int argmax_row(const double* row, int n) {
    int best = 0;
    for (int j = 1; j < n; ++j) {
        if (row[j] > row[best]) {
            best = j;
        }
    }
    return best;
}

template <typename T> void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T> void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

} // namespace

void ToyConfig::validate() const {
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
        throw ValidationError("d_model must be a positive multiple of n_heads");
    }
    if (n_layers < 1) {
        throw ValidationError("n_layers must be >= 1");
    }
    if (mixer_layers < 0) {
        throw ValidationError("mixer_layers must be >= 0");
    }
    if (vocab_size < 258) {
        throw ValidationError("vocab_size must cover 256 bytes plus BOS/EOS (>= 258)");
    }
    if (cell <= 0 || (channels != 1 && channels != 3)) {
        throw ValidationError("cell must be positive and channels 1 (grayscale) or 3 (rgb)");
    }
    if (max_seq < 4) {
        throw ValidationError("max_seq too small");
    }
    if (!(learning_rate > 0.0)) {
        throw ValidationError("learning_rate must be positive");
    }
    if (steps < 1 || batch_size < 1 || checkpoint_every < 1 || max_answer_len < 1) {
        throw ValidationError("steps, batch_size, checkpoint_every, max_answer_len must be >= 1");
    }
}

NetDims NetDims::of(const ToyConfig& cfg) {
    NetDims d;
    d.d_model = cfg.d_model;
    d.n_layers = cfg.n_layers;
    d.n_heads = cfg.n_heads;
    d.mixer_layers = cfg.mixer_layers;
    d.vocab_size = cfg.vocab_size;
    d.max_seq = cfg.max_seq;
    d.cell = cfg.cell;
    d.channels = cfg.channels;
    return d;
}

Parameters Parameters::init(const ToyConfig& cfg) {
    Parameters p = make_params(NetDims::of(cfg));
    Rng rng = Rng::derive(cfg.seed, 0);
    p.for_each_tensor([&](const std::string& name, Matrix& m) {
        bool is_gain = name.find("gain") != std::string::npos;
        bool is_bias = name == "patch_b";
        bool is_embed = name == "token_embed" || name == "pos_embed";
        if (is_gain) {
            std::fill(m.data.begin(), m.data.end(), 1.0);
        } else if (is_bias) {
            m.zero();
        } else {
            // 1/sqrt(fan_in) for linears (rows = input dim), 0.1 for embeddings
            double std = is_embed ? 0.1 : 1.0 / std::sqrt(static_cast<double>(m.rows));
            for (double& w : m.data) {
                w = std * rng.next_normal();
            }
        }
    });
    return p;
}

Parameters Parameters::zeros_like(const Parameters& p) { return make_params(p.dims); }

void Parameters::scale_add(const Parameters& g, double factor) {
    std::vector<const Matrix*> src;
    g.for_each_tensor([&](const std::string&, const Matrix& m) { src.push_back(&m); });
    std::size_t idx = 0;
    for_each_tensor([&](const std::string&, Matrix& m) {
        const Matrix& s = *src[idx++];
        for (std::size_t i = 0; i < m.data.size(); ++i) {
            m.data[i] += factor * s.data[i];
        }
    });
}

void Parameters::zero_all() {
    for_each_tensor([](const std::string&, Matrix& m) { m.zero(); });
}

std::size_t Parameters::scalar_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const std::string&, const Matrix& m) { n += m.data.size(); });
    return n;
}

Matrix patches_of(const Image& img, const PatchGrid& grid, const NetDims& dims) {
    if (img.width != grid.width() || img.height != grid.height()) {
        throw std::invalid_argument("image dims do not match the grid");
    }
    if (grid.cell != dims.cell) {
        throw std::invalid_argument("grid cell does not match the model cell");
    }
    Matrix patches(grid.token_count(), dims.patch_dim());
    for (int r = 0; r < grid.rows; ++r) {
        for (int cidx = 0; cidx < grid.cols; ++cidx) {
            double* out = patches.row(r * grid.cols + cidx);
            int k = 0;
            for (int py = 0; py < grid.cell; ++py) {
                for (int px = 0; px < grid.cell; ++px) {
                    Rgb c = img.at(cidx * grid.cell + px, r * grid.cell + py);
                    if (dims.channels == 1) {
                        out[k++] = (c.r + c.g + c.b) / (3.0 * 255.0);
                    } else {
                        out[k++] = c.r / 255.0;
                        out[k++] = c.g / 255.0;
                        out[k++] = c.b / 255.0;
                    }
                }
            }
        }
    }
    return patches;
}

ModelSample build_sample(const LabeledSample& sample, const Image& img, const NetDims& dims) {
    if (dims.vocab_size < 258) {
        throw std::invalid_argument("byte-level samples need vocab_size >= 258");
    }
    if (sample.response.empty()) {
        throw std::invalid_argument("sample " + sample.sample_id + " has an empty response");
    }
    ModelSample s;
    s.sample_id = sample.sample_id;
    s.patches = patches_of(img, sample.grid, dims);
    s.prompt_len = static_cast<int>(sample.prompt.size());
    s.answer = sample.response;
    s.text_ids.push_back(kByteBos);
    for (unsigned char b : sample.prompt) {
        s.text_ids.push_back(b);
    }
    for (unsigned char b : sample.response) {
        s.text_ids.push_back(b);
    }
    int m = s.patches.rows;
    int total = m + static_cast<int>(s.text_ids.size());
    if (total > dims.max_seq) {
        throw std::invalid_argument("sample " + sample.sample_id + " needs " +
                                    std::to_string(total) + " positions, max_seq is " +
                                    std::to_string(dims.max_seq));
    }
    s.kinds.assign(static_cast<std::size_t>(total), PositionKind::prompt);
    s.targets.assign(static_cast<std::size_t>(total), kNoTarget);
    for (int i = 0; i < m; ++i) {
        s.kinds[static_cast<std::size_t>(i)] = PositionKind::visual;
    }
    for (const VisionLabel& l : sample.vision_labels) {
        if (l.token_index < 0 || l.token_index >= m) {
            throw std::invalid_argument("vision label token index out of range");
        }
        if (l.first_token_id < 0 || l.first_token_id >= dims.vocab_size) {
            throw std::invalid_argument("vision label id outside the model vocabulary");
        }
        s.targets[static_cast<std::size_t>(l.token_index)] = l.first_token_id;
        s.vision_label_set.push_back(l.first_token_id);
    }
    std::sort(s.vision_label_set.begin(), s.vision_label_set.end());
    s.vision_label_set.erase(std::unique(s.vision_label_set.begin(), s.vision_label_set.end()),
                             s.vision_label_set.end());
    // Text positions: logits at text index j predict text_ids[j+1]; supervision
    // starts where the prediction is the first answer byte and ends on EOS.
    int p_len = s.prompt_len;
    int a_len = static_cast<int>(sample.response.size());
    for (int j = 0; j <= p_len + a_len; ++j) {
        int pos = m + j;
        if (j < p_len) {
            continue; // predicts a prompt byte; unsupervised
        }
        s.kinds[static_cast<std::size_t>(pos)] = PositionKind::response;
        int next = j + 1;
        s.targets[static_cast<std::size_t>(pos)] =
            next <= p_len + a_len ? s.text_ids[static_cast<std::size_t>(next)] : kByteEos;
    }
    return s;
}

Matrix forward(const Parameters& p, const ModelSample& s, ForwardCache* cache) {
    ForwardCache local;
    ForwardCache& c = cache != nullptr ? *cache : local;
    const NetDims& dims = p.dims;
    int m = s.visual_len();
    int t = s.total_len();
    if (t > dims.max_seq) {
        throw std::invalid_argument("sequence exceeds max_seq");
    }
    if (s.patches.cols != dims.patch_dim()) {
        throw std::invalid_argument("patch width does not match the model");
    }
    c.embedded = Matrix(t, dims.d_model);
    if (m > 0) {
        mm(s.patches.data.data(), m, dims.patch_dim(), p.patch_w.data.data(), dims.d_model,
           c.embedded.row(0), false);
    }
    for (int i = 0; i < t; ++i) {
        double* row = c.embedded.row(i);
        if (i < m) {
            const double* b = p.patch_b.row(0);
            for (int j = 0; j < dims.d_model; ++j) {
                row[j] += b[j];
            }
        } else {
            int id = s.text_ids[static_cast<std::size_t>(i - m)];
            if (id < 0 || id >= dims.vocab_size) {
                throw std::invalid_argument("text id outside the model vocabulary");
            }
            const double* e = p.token_embed.row(id);
            for (int j = 0; j < dims.d_model; ++j) {
                row[j] = e[j];
            }
        }
        const double* pe = p.pos_embed.row(i);
        for (int j = 0; j < dims.d_model; ++j) {
            row[j] += pe[j];
        }
    }
    Matrix x = c.embedded;
    c.mixer.resize(p.mixer.size());
    for (std::size_t i = 0; i < p.mixer.size(); ++i) {
        if (m > 0) {
            block_forward(p.mixer[i], x, 0, m, false, dims.n_heads, c.mixer[i]);
        }
    }
    c.decoder.resize(p.decoder.size());
    for (std::size_t i = 0; i < p.decoder.size(); ++i) {
        block_forward(p.decoder[i], x, 0, t, true, dims.n_heads, c.decoder[i]);
    }
    c.final_in = x;
    rmsnorm_rows(c.final_in, p.final_gain, 0, t, c.final_normed, c.final_inv);
    Matrix logits(t, dims.vocab_size);
    mm(c.final_normed.data.data(), t, dims.d_model, p.unembed.data.data(), dims.vocab_size,
       logits.data.data(), false);
    return logits;
}

void backward(const Parameters& p, const ModelSample& s, const ForwardCache& cache,
              const Matrix& dlogits, Parameters& grad) {
    const NetDims& dims = p.dims;
    int m = s.visual_len();
    int t = s.total_len();
    if (dlogits.rows != t || dlogits.cols != dims.vocab_size) {
        throw std::invalid_argument("dlogits shape mismatch");
    }
    mm_at_b(cache.final_normed.data.data(), t, dims.d_model, dlogits.data.data(),
            dims.vocab_size, grad.unembed.data.data());
    Matrix dnormed(t, dims.d_model);
    mm_a_bt(dlogits.data.data(), t, dims.vocab_size, p.unembed.data.data(), dims.d_model,
            dnormed.data.data(), false);
    Matrix dx(t, dims.d_model);
    rmsnorm_backward(cache.final_in, p.final_gain, cache.final_inv, dnormed, 0, t, dx,
                     grad.final_gain);
    for (std::size_t i = p.decoder.size(); i-- > 0;) {
        dx = block_backward(p.decoder[i], cache.decoder[i], dx, 0, t, true, dims.n_heads,
                            grad.decoder[i]);
    }
    for (std::size_t i = p.mixer.size(); i-- > 0;) {
        if (m > 0) {
            dx = block_backward(p.mixer[i], cache.mixer[i], dx, 0, m, false, dims.n_heads,
                                grad.mixer[i]);
        }
    }
    if (m > 0) {
        mm_at_b(s.patches.data.data(), m, dims.patch_dim(), dx.data.data(), dims.d_model,
                grad.patch_w.data.data());
    }
    for (int i = 0; i < t; ++i) {
        const double* drow = dx.row(i);
        double* dpos = grad.pos_embed.row(i);
        for (int j = 0; j < dims.d_model; ++j) {
            dpos[j] += drow[j];
        }
        if (i < m) {
            double* db = grad.patch_b.row(0);
            for (int j = 0; j < dims.d_model; ++j) {
                db[j] += drow[j];
            }
        } else {
            double* de = grad.token_embed.row(s.text_ids[static_cast<std::size_t>(i - m)]);
            for (int j = 0; j < dims.d_model; ++j) {
                de[j] += drow[j];
            }
        }
    }
}

SequenceBatch batch_of(const ModelSample& s, Matrix logits) {
    SequenceBatch b;
    b.kinds = s.kinds;
    b.targets = s.targets;
    b.logits = std::move(logits);
    b.vision_label_set = s.vision_label_set;
    return b;
}

std::string greedy_decode(const Parameters& p, const ModelSample& s, int max_len) {
    ModelSample work = s;
    work.text_ids.resize(static_cast<std::size_t>(1 + s.prompt_len));
    std::string out;
    for (int step = 0; step < max_len; ++step) {
        if (work.total_len() >= p.dims.max_seq) {
            break;
        }
        Matrix logits = forward(p, work, nullptr);
        int id = argmax_row(logits.row(logits.rows - 1), logits.cols);
        if (id >= 256) {
            break; // EOS (or BOS, which only ever terminates)
        }
        out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
        work.text_ids.push_back(id);
    }
    return out;
}

double evaluate_extraction(const Parameters& p, std::span<const ModelSample> samples,
                           int max_len) {
    if (samples.empty()) {
        throw std::invalid_argument("evaluate_extraction on an empty set");
    }
    int hits = 0;
    for (const ModelSample& s : samples) {
        if (greedy_decode(p, s, max_len) == s.answer) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

double vision_label_top1(const Parameters& p, std::span<const ModelSample> samples) {
    long long labeled = 0;
    long long hits = 0;
    for (const ModelSample& s : samples) {
        Matrix logits = forward(p, s, nullptr);
        for (int i = 0; i < s.visual_len(); ++i) {
            int target = s.targets[static_cast<std::size_t>(i)];
            if (target == kNoTarget) {
                continue;
            }
            ++labeled;
            if (argmax_row(logits.row(i), logits.cols) == target) {
                ++hits;
            }
        }
    }
    if (labeled == 0) {
        throw std::invalid_argument("no labeled visual positions in the evaluation set");
    }
    return static_cast<double>(hits) / static_cast<double>(labeled);
}

std::vector<std::vector<int>> probe_visual_logits(const Parameters& p, const ModelSample& s,
                                                  int k) {
    Matrix logits = forward(p, s, nullptr);
    std::vector<std::vector<int>> out;
    out.reserve(static_cast<std::size_t>(s.visual_len()));
    for (int i = 0; i < s.visual_len(); ++i) {
        const double* row = logits.row(i);
        std::vector<int> ids(static_cast<std::size_t>(logits.cols));
        for (int j = 0; j < logits.cols; ++j) {
            ids[static_cast<std::size_t>(j)] = j;
        }
        int take = std::min(k, logits.cols);
        std::partial_sort(ids.begin(), ids.begin() + take, ids.end(), [&](int a, int b) {
            if (row[a] != row[b]) {
                return row[a] > row[b];
            }
            return a < b;
        });
        ids.resize(static_cast<std::size_t>(take));
        out.push_back(std::move(ids));
    }
    return out;
}

TrainResult train(const ToyConfig& cfg, const LossConfig& loss_cfg,
                  const std::vector<ModelSample>& train_set,
                  const std::vector<ModelSample>& val_set) {
    loss_cfg.validate();
    if (train_set.empty() || val_set.empty()) {
        throw ValidationError("training needs non-empty train and validation sets");
    }
    TrainResult result;
    result.params = Parameters::init(cfg);
    Parameters grad = Parameters::zeros_like(result.params);

    auto checkpoint = [&](int step, double lt, double lv) {
        CheckpointRecord rec;
        rec.step = step;
        rec.text_loss = lt;
        rec.vision_loss = lv;
        rec.val_extraction = evaluate_extraction(result.params, val_set, cfg.max_answer_len);
        rec.vision_top1 = vision_label_top1(result.params, val_set);
        result.report.checkpoints.push_back(rec);
    };

    // Pre-update state first: the initial loss magnitudes are part of the story.
    {
        double lt = 0.0;
        double lv = 0.0;
        for (const ModelSample& s : train_set) {
            auto batch = batch_of(s, forward(result.params, s, nullptr));
            auto breakdown = combined_loss(batch, loss_cfg);
            lt += breakdown.text;
            lv += breakdown.vision;
        }
        checkpoint(0, lt / static_cast<double>(train_set.size()),
                   lv / static_cast<double>(train_set.size()));
    }

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::size_t cursor = order.size(); // forces a shuffle at step 1
    int epoch = 0;
    double sum_lt = 0.0;
    double sum_lv = 0.0;
    int since_checkpoint = 0;
    ForwardCache cache;
    for (int step = 1; step <= cfg.steps; ++step) {
        grad.zero_all();
        double batch_lt = 0.0;
        double batch_lv = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                Rng shuffle_rng = Rng::derive(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch));
                for (std::size_t i = order.size(); i > 1; --i) {
                    std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
                }
                cursor = 0;
                ++epoch;
            }
            const ModelSample& s = train_set[order[cursor++]];
            Matrix logits = forward(result.params, s, &cache);
            SequenceBatch batch = batch_of(s, std::move(logits));
            LossBreakdown breakdown = combined_loss(batch, loss_cfg);
            batch_lt += breakdown.text;
            batch_lv += breakdown.vision;
            Matrix dlogits = loss_gradient(batch, loss_cfg);
            double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
            for (double& v : dlogits.data) {
                v *= inv_b;
            }
            backward(result.params, s, cache, dlogits, grad);
        }
        batch_lt /= cfg.batch_size;
        batch_lv /= cfg.batch_size;
        if (!std::isfinite(batch_lt) || !std::isfinite(batch_lv)) {
            result.report.diverged = true;
            result.report.diverged_step = step;
            return result;
        }
        result.params.scale_add(grad, -cfg.learning_rate);
        sum_lt += batch_lt;
        sum_lv += batch_lv;
        ++since_checkpoint;
        if (step % cfg.checkpoint_every == 0 || step == cfg.steps) {
            checkpoint(step, sum_lt / since_checkpoint, sum_lv / since_checkpoint);
            sum_lt = 0.0;
            sum_lv = 0.0;
            since_checkpoint = 0;
        }
    }
    return result;
}

void save_params(const std::filesystem::path& path, const Parameters& p,
                 std::uint64_t config_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for write: " + path.string());
    }
    out.write("DVFP", 4);
    write_pod(out, std::uint32_t{1});
    write_pod(out, config_hash);
    const NetDims& d = p.dims;
    for (int v : {d.d_model, d.n_layers, d.n_heads, d.mixer_layers, d.vocab_size, d.max_seq,
                  d.cell, d.channels}) {
        write_pod(out, static_cast<std::int32_t>(v));
    }
    std::uint32_t count = 0;
    p.for_each_tensor([&](const std::string&, const Matrix&) { ++count; });
    write_pod(out, count);
    p.for_each_tensor([&](const std::string& name, const Matrix& m) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, static_cast<std::int32_t>(m.rows));
        write_pod(out, static_cast<std::int32_t>(m.cols));
    });
    p.for_each_tensor([&](const std::string&, const Matrix& m) {
        out.write(reinterpret_cast<const char*>(m.data.data()),
                  static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    });
    if (!out) {
        throw std::runtime_error("short write: " + path.string());
    }
}

Parameters load_params(const std::filesystem::path& path, std::uint64_t* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open: " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DVFP", 4) != 0) {
        throw std::runtime_error(path.string() + ": not a parameters file");
    }
    std::uint32_t version = 0;
    read_pod(in, version);
    if (version != 1) {
        throw std::runtime_error(path.string() + ": unsupported version " +
                                 std::to_string(version));
    }
    std::uint64_t hash = 0;
    read_pod(in, hash);
    if (config_hash != nullptr) {
        *config_hash = hash;
    }
    NetDims d;
    for (int* v : {&d.d_model, &d.n_layers, &d.n_heads, &d.mixer_layers, &d.vocab_size,
                   &d.max_seq, &d.cell, &d.channels}) {
        std::int32_t raw = 0;
        read_pod(in, raw);
        *v = raw;
    }
    Parameters p = make_params(d);
    std::uint32_t count = 0;
    read_pod(in, count);
    std::uint32_t expected = 0;
    p.for_each_tensor([&](const std::string&, const Matrix&) { ++expected; });
    if (count != expected) {
        throw std::runtime_error(path.string() + ": tensor directory does not match the dims");
    }
    p.for_each_tensor([&](const std::string& name, Matrix& m) {
        std::uint32_t len = 0;
        read_pod(in, len);
        std::string stored(len, '\0');
        in.read(stored.data(), len);
        std::int32_t rows = 0;
        std::int32_t cols = 0;
        read_pod(in, rows);
        read_pod(in, cols);
        if (stored != name || rows != m.rows || cols != m.cols) {
            throw std::runtime_error(path.string() + ": tensor " + name +
                                     " does not match the stored layout");
        }
    });
    p.for_each_tensor([&](const std::string&, Matrix& m) {
        in.read(reinterpret_cast<char*>(m.data.data()),
                static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    });
    if (!in) {
        throw std::runtime_error(path.string() + ": truncated tensor data");
    }
    return p;
}

} // namespace dvforge
