#include "sfp/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "sfp/errors.hpp"
#include "sfp/rng.hpp"

namespace sfp::datasets {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be_u32(std::ifstream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw Error(ErrorCode::FormatError, std::string("truncated while reading ") + what);
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

// Modified Gram-Schmidt on seeded gaussian columns; returns d x k with
// orthonormal columns.
Matrix random_orthonormal(std::size_t d, std::size_t k, Rng& rng) {
    Matrix q(d, k);
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> col(d);
        for (;;) {
            for (std::size_t i = 0; i < d; ++i) col[i] = rng.normal();
            for (std::size_t c = 0; c < j; ++c) {
                double dot = 0.0;
                for (std::size_t i = 0; i < d; ++i) dot += col[i] * q(i, c);
                for (std::size_t i = 0; i < d; ++i) col[i] -= dot * q(i, c);
            }
            double norm = 0.0;
            for (double x : col) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
                for (std::size_t i = 0; i < d; ++i) q(i, j) = col[i] / norm;
                break;
            }
        }
    }
    return q;
}

// 5x7 bitmap font for the digits, one row per scanline.
constexpr std::uint8_t kGlyphs[10][7] = {
    {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110},  // 0
    {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110},  // 1
    {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111},  // 2
    {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110},  // 3
    {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010},  // 4
    {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110},  // 5
    {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110},  // 6
    {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000},  // 7
    {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110},  // 8
    {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100},  // 9
};

bool is_foreground_pixel(const double* rgb) {
    return rgb[0] >= 0.999 && rgb[1] >= 0.999 && rgb[2] >= 0.999;
}

void recolor_sample(Matrix& data, std::size_t row, const std::array<double, 3>& color) {
    double* px = data.row_ptr(row);
    for (std::size_t p = 0; p < 28 * 28; ++p) {
        double* rgb = px + 3 * p;
        if (is_foreground_pixel(rgb)) continue;
        rgb[0] = color[0];
        rgb[1] = color[1];
        rgb[2] = color[2];
    }
}

}  // namespace

double Environment::id_fraction() const {
    if (id_mask.empty()) return 0.0;
    std::size_t count = 0;
    for (std::uint8_t flag : id_mask) count += flag ? 1 : 0;
    return static_cast<double>(count) / static_cast<double>(id_mask.size());
}

Palette Palette::standard() {
    Palette p;
    for (int k = 0; k < 10; ++k) {
        // hue wheel at full saturation/value
        const double h = 36.0 * k / 60.0;  // sector coordinate
        const int sector = static_cast<int>(h) % 6;
        const double frac = h - std::floor(h);
        const double q = 1.0 - frac;
        double r = 0, g = 0, b = 0;
        switch (sector) {
            case 0: r = 1; g = frac; b = 0; break;
            case 1: r = q; g = 1; b = 0; break;
            case 2: r = 0; g = 1; b = frac; break;
            case 3: r = 0; g = q; b = 1; break;
            case 4: r = frac; g = 0; b = 1; break;
            default: r = 1; g = 0; b = q; break;
        }
        p.colors[static_cast<std::size_t>(k)] = {r, g, b};
    }
    return p;
}

std::pair<Matrix, std::vector<int>> load_idx(const std::string& images_path,
                                             const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw Error(ErrorCode::FormatError, "cannot open " + images_path);
    if (read_be_u32(img, "image magic") != kImageMagic) {
        throw Error(ErrorCode::FormatError, "bad image magic in " + images_path);
    }
    const std::uint32_t n = read_be_u32(img, "image count");
    const std::uint32_t rows = read_be_u32(img, "row count");
    const std::uint32_t cols = read_be_u32(img, "column count");

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw Error(ErrorCode::FormatError, "cannot open " + labels_path);
    if (read_be_u32(lab, "label magic") != kLabelMagic) {
        throw Error(ErrorCode::FormatError, "bad label magic in " + labels_path);
    }
    const std::uint32_t n_labels = read_be_u32(lab, "label count");
    if (n != n_labels) {
        throw Error(ErrorCode::InconsistentFiles, "image/label counts differ");
    }

    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    Matrix images(n, pixels);
    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
            throw Error(ErrorCode::FormatError, "truncated image payload");
        }
        double* row = images.row_ptr(i);
        for (std::size_t p = 0; p < pixels; ++p) row[p] = buf[p] / 255.0;
    }
    std::vector<int> labels(n);
    std::vector<unsigned char> lbuf(n);
    if (n > 0 &&
        !lab.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(n))) {
        throw Error(ErrorCode::FormatError, "truncated label payload");
    }
    for (std::uint32_t i = 0; i < n; ++i) labels[i] = lbuf[i];
    return {std::move(images), std::move(labels)};
}

Environment build_colored_mnist(const Matrix& images, const std::vector<int>& labels,
                                double bias_ratio, const Palette& palette, std::uint64_t seed) {
    if (bias_ratio < 0.0 || bias_ratio > 1.0) {
        throw Error(ErrorCode::InvalidInput, "bias ratio outside [0, 1]");
    }
    if (images.rows() != labels.size()) {
        throw Error(ErrorCode::InconsistentFiles, "image/label counts differ");
    }
    const std::size_t n = images.rows();
    const std::size_t pixels = images.cols();

    Environment env;
    env.kind = EnvKind::Image;
    env.bias_ratio = bias_ratio;
    env.seed = seed;
    env.classes = 10;
    env.palette = palette;
    env.labels = labels;
    env.id_mask.assign(n, 0);
    env.data = Matrix(n, pixels * 3);

    Rng rng(seed);
    // exact biased count keeps the id fraction within 1/n of the ratio
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const std::size_t n_biased =
        static_cast<std::size_t>(std::llround(bias_ratio * static_cast<double>(n)));
    for (std::size_t k = 0; k < n_biased && k < n; ++k) env.id_mask[order[k]] = 1;

    for (std::size_t i = 0; i < n; ++i) {
        const int label = labels[i];
        if (label < 0 || label > 9) {
            throw Error(ErrorCode::InvalidInput, "digit label out of range");
        }
        const std::array<double, 3>& bg =
            env.id_mask[i] ? palette.colors[static_cast<std::size_t>(label)]
                           : palette.colors[rng.uniform_index(10)];
        const double* gray = images.row_ptr(i);
        double* out = env.data.row_ptr(i);
        for (std::size_t p = 0; p < pixels; ++p) {
            double* rgb = out + 3 * p;
            if (gray[p] > 0.5) {
                rgb[0] = rgb[1] = rgb[2] = 1.0;
            } else {
                rgb[0] = bg[0];
                rgb[1] = bg[1];
                rgb[2] = bg[2];
            }
        }
    }
    return env;
}

std::pair<Matrix, std::vector<int>> render_digit_glyphs(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix images(n, 28 * 28);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int digit = static_cast<int>(rng.uniform_index(10));
        labels[i] = digit;
        // 5x7 glyph scaled x3 => 15x21, jittered placement
        const int ox = 6 + static_cast<int>(rng.uniform_index(7)) - 3;
        const int oy = 3 + static_cast<int>(rng.uniform_index(7)) - 3;
        const double intensity = rng.uniform(0.75, 1.0);
        double* img = images.row_ptr(i);
        for (int gy = 0; gy < 7; ++gy) {
            for (int gx = 0; gx < 5; ++gx) {
                if (!(kGlyphs[digit][gy] & (1 << (4 - gx)))) continue;
                for (int sy = 0; sy < 3; ++sy) {
                    for (int sx = 0; sx < 3; ++sx) {
                        const int y = oy + gy * 3 + sy;
                        const int x = ox + gx * 3 + sx;
                        if (y < 0 || y >= 28 || x < 0 || x >= 28) continue;
                        img[y * 28 + x] = intensity;
                    }
                }
            }
        }
    }
    return {std::move(images), std::move(labels)};
}

LinearTaskBundle gen_linear_task(std::size_t d_spurious, std::size_t d_unknown,
                                 std::size_t d_invariant, double p_i, double p_o,
                                 std::size_t n, double noise_std, std::uint64_t seed,
                                 std::size_t classes, std::size_t ambient_dim) {
    if (d_invariant < 1) {
        throw Error(ErrorCode::InvalidInput, "invariant block must have at least one dimension");
    }
    if (std::fabs(p_i + p_o - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidInput, "proportions must sum to 1");
    }
    if (n < 10) throw Error(ErrorCode::InvalidInput, "n must be >= 10");
    const std::size_t block_sum = d_spurious + d_unknown + d_invariant;
    const std::size_t d = ambient_dim == 0 ? block_sum : ambient_dim;
    if (block_sum > d) {
        throw Error(ErrorCode::InvalidInput, "feature blocks exceed the ambient dimension");
    }

    Rng rng(seed);
    const Matrix q = random_orthonormal(d, block_sum, rng);

    LinearTaskBundle bundle;
    SyntheticLinearTask& task = bundle.task;
    task.f_prime = q.cols_range(0, d_spurious);
    task.g_prime = q.cols_range(d_spurious, d_unknown);
    task.in_block = q.cols_range(d_spurious + d_unknown, d_invariant);

    Matrix coef(classes, d_invariant);
    for (std::size_t i = 0; i < coef.size(); ++i) coef.data()[i] = rng.normal();
    task.w_star = matmul_nt(coef, task.in_block);  // C x d, rows in span(in_block)

    // ID spurious coordinates track the invariant signal (plus a small
    // independent remainder), so the spurious channel predicts the label
    // inside the ID population without carrying any causal weight. The OOD
    // unknown coordinates are label-independent noise.
    Matrix spur_mix(d_spurious, d_invariant);
    const double mix_scale = 1.0 / std::sqrt(static_cast<double>(d_invariant));
    for (std::size_t i = 0; i < spur_mix.size(); ++i) {
        spur_mix.data()[i] = mix_scale * rng.normal();
    }
    constexpr double kSpuriousNoise = 0.3;

    auto draw_sample = [&](bool id_sample, double* row, std::vector<double>& z_in) {
        for (double& z : z_in) z = rng.normal();
        const Matrix& block = id_sample ? task.f_prime : task.g_prime;
        const std::size_t d_block = block.cols();
        std::vector<double> z_env(d_block);
        if (id_sample) {
            for (std::size_t j = 0; j < d_block; ++j) {
                double v = 0.0;
                for (std::size_t k = 0; k < d_invariant; ++k) v += spur_mix(j, k) * z_in[k];
                z_env[j] = v + kSpuriousNoise * rng.normal();
            }
        } else {
            for (double& z : z_env) z = rng.normal();
        }
        for (std::size_t i = 0; i < d; ++i) {
            double x = 0.0;
            for (std::size_t j = 0; j < d_block; ++j) x += block(i, j) * z_env[j];
            for (std::size_t j = 0; j < d_invariant; ++j) x += task.in_block(i, j) * z_in[j];
            row[i] = x;
        }
    };

    auto fill_env = [&](Environment& env, std::size_t count, double ratio) {
        env.kind = EnvKind::Features;
        env.bias_ratio = ratio;
        env.seed = seed;
        env.classes = static_cast<int>(classes);
        env.data = Matrix(count, d);
        env.labels.resize(count);
        env.id_mask.assign(count, 0);
        env.targets = Matrix(count, classes);

        std::vector<std::size_t> order(count);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        const std::size_t n_id =
            static_cast<std::size_t>(std::llround(ratio * static_cast<double>(count)));
        for (std::size_t k = 0; k < n_id && k < count; ++k) env.id_mask[order[k]] = 1;

        std::vector<double> z_in(d_invariant);
        for (std::size_t i = 0; i < count; ++i) {
            draw_sample(env.id_mask[i] != 0, env.data.row_ptr(i), z_in);
            // clean signal decides the label; the stored target carries noise
            double best = -1e300;
            int label = 0;
            for (std::size_t c = 0; c < classes; ++c) {
                double y = 0.0;
                for (std::size_t j = 0; j < d_invariant; ++j) y += coef(c, j) * z_in[j];
                env.targets(i, c) = y + noise_std * rng.normal();
                if (y > best) {
                    best = y;
                    label = static_cast<int>(c);
                }
            }
            env.labels[i] = label;
        }
    };

    fill_env(bundle.train, n, p_i);
    fill_env(bundle.test_ood, n, 0.0);

    // the theory-side view of the generated world
    std::vector<std::vector<double>> id_rows, ood_rows;
    for (std::size_t i = 0; i < bundle.train.size(); ++i) {
        (bundle.train.id_mask[i] ? id_rows : ood_rows).push_back(bundle.train.data.row_vec(i));
    }
    if (id_rows.empty()) id_rows.push_back(bundle.test_ood.data.row_vec(0));
    if (ood_rows.empty()) ood_rows.push_back(bundle.test_ood.data.row_vec(0));
    task.spec.x_id = Matrix::from_rows(id_rows);
    task.spec.x_ood = Matrix::from_rows(ood_rows);
    task.spec.p_i = p_i;
    task.spec.p_o = p_o;

    // true coordinates of W* in the two feature frames
    const std::size_t dim_s = d_spurious + d_invariant;
    const std::size_t dim_u = d_unknown + d_invariant;
    Matrix f_frame(d, dim_s), g_frame(d, dim_u);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d_spurious; ++j) f_frame(i, j) = task.f_prime(i, j);
        for (std::size_t j = 0; j < d_invariant; ++j) {
            f_frame(i, d_spurious + j) = task.in_block(i, j);
        }
        for (std::size_t j = 0; j < d_unknown; ++j) g_frame(i, j) = task.g_prime(i, j);
        for (std::size_t j = 0; j < d_invariant; ++j) {
            g_frame(i, d_unknown + j) = task.in_block(i, j);
        }
    }
    task.a_star = matmul_tn(f_frame, task.w_star.transposed());
    task.b_star = matmul_tn(g_frame, task.w_star.transposed());
    return bundle;
}

std::vector<Environment> split_environments(const Environment& env,
                                            const std::vector<double>& ratios,
                                            std::uint64_t seed) {
    if (ratios.empty()) throw Error(ErrorCode::InvalidInput, "no ratios given");
    for (double r : ratios) {
        if (r < 0.0 || r > 1.0) throw Error(ErrorCode::InvalidInput, "ratio outside [0, 1]");
    }
    const std::size_t n = env.size();
    const std::size_t parts = ratios.size();
    if (n < parts) throw Error(ErrorCode::InsufficientData, "fewer samples than partitions");

    Rng rng(seed);
    std::vector<std::size_t> sizes(parts, n / parts);
    for (std::size_t k = 0; k < n % parts; ++k) sizes[k] += 1;

    auto build_part = [&](const std::vector<std::size_t>& rows, double ratio,
                          std::uint64_t part_seed) {
        Environment out;
        out.kind = env.kind;
        out.bias_ratio = ratio;
        out.seed = part_seed;
        out.classes = env.classes;
        out.palette = env.palette;
        out.data = Matrix(rows.size(), env.data.cols());
        out.labels.resize(rows.size());
        out.id_mask.assign(rows.size(), 0);
        if (!env.targets.empty()) out.targets = Matrix(rows.size(), env.targets.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::copy(env.data.row_ptr(rows[i]), env.data.row_ptr(rows[i]) + env.data.cols(),
                      out.data.row_ptr(i));
            out.labels[i] = env.labels[rows[i]];
            out.id_mask[i] = env.id_mask[rows[i]];
            if (!env.targets.empty()) {
                std::copy(env.targets.row_ptr(rows[i]),
                          env.targets.row_ptr(rows[i]) + env.targets.cols(),
                          out.targets.row_ptr(i));
            }
        }
        return out;
    };

    std::vector<Environment> outputs;
    if (env.kind == EnvKind::Image) {
        // disjoint partition, then redraw backgrounds to hit each ratio
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        std::size_t cursor = 0;
        for (std::size_t k = 0; k < parts; ++k) {
            std::vector<std::size_t> rows(order.begin() + static_cast<long>(cursor),
                                          order.begin() + static_cast<long>(cursor + sizes[k]));
            cursor += sizes[k];
            Environment part = build_part(rows, ratios[k], seed + k + 1);

            std::vector<std::size_t> local(part.size());
            std::iota(local.begin(), local.end(), 0);
            rng.shuffle(local);
            const std::size_t n_biased = static_cast<std::size_t>(
                std::llround(ratios[k] * static_cast<double>(part.size())));
            std::fill(part.id_mask.begin(), part.id_mask.end(), 0);
            for (std::size_t i = 0; i < part.size(); ++i) {
                const std::size_t row = local[i];
                const bool biased = i < n_biased;
                part.id_mask[row] = biased ? 1 : 0;
                const std::array<double, 3>& color =
                    biased ? part.palette.colors[static_cast<std::size_t>(part.labels[row])]
                           : part.palette.colors[rng.uniform_index(10)];
                recolor_sample(part.data, row, color);
            }
            outputs.push_back(std::move(part));
        }
        return outputs;
    }

    // feature environments: redistribute between the ID and OOD pools
    std::vector<std::size_t> id_pool, ood_pool;
    for (std::size_t i = 0; i < n; ++i) {
        (env.id_mask[i] ? id_pool : ood_pool).push_back(i);
    }
    rng.shuffle(id_pool);
    rng.shuffle(ood_pool);
    std::size_t id_cursor = 0, ood_cursor = 0;
    for (std::size_t k = 0; k < parts; ++k) {
        const std::size_t want_id =
            static_cast<std::size_t>(std::llround(ratios[k] * static_cast<double>(sizes[k])));
        const std::size_t want_ood = sizes[k] - want_id;
        if (id_cursor + want_id > id_pool.size() || ood_cursor + want_ood > ood_pool.size()) {
            throw Error(ErrorCode::InsufficientData,
                        "sample pools cannot satisfy the requested bias ratios");
        }
        std::vector<std::size_t> rows;
        rows.reserve(sizes[k]);
        for (std::size_t i = 0; i < want_id; ++i) rows.push_back(id_pool[id_cursor++]);
        for (std::size_t i = 0; i < want_ood; ++i) rows.push_back(ood_pool[ood_cursor++]);
        rng.shuffle(rows);
        outputs.push_back(build_part(rows, ratios[k], seed + k + 1));
    }
    return outputs;
}

}  // namespace sfp::datasets
