#include "simgraph/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <unordered_set>

#include "simgraph/parallel.hpp"

namespace simgraph {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(size);
    if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!in) throw DataError("failed reading " + path.string());
    return bytes;
}

template <typename T>
Matrix<T> parse_vecs(std::span<const std::uint8_t> bytes, std::string_view kind) {
    static_assert(sizeof(T) == 4);
    Matrix<T> out;
    std::vector<T> data;
    std::size_t rows = 0;
    std::int32_t dim = 0;
    std::size_t offset = 0;
    while (offset < bytes.size()) {
        if (bytes.size() - offset < 4) {
            throw FormatError(std::string(kind) + ": truncated dimension header at byte offset " +
                                  std::to_string(offset),
                              offset);
        }
        std::int32_t d = 0;
        std::memcpy(&d, bytes.data() + offset, 4);
        if (d <= 0) {
            throw FormatError(std::string(kind) + ": non-positive dimension " + std::to_string(d) +
                                  " at byte offset " + std::to_string(offset),
                              offset);
        }
        if (rows > 0 && d != dim) {
            throw FormatError(std::string(kind) + ": record at byte offset " +
                                  std::to_string(offset) + " has dim " + std::to_string(d) +
                                  ", expected " + std::to_string(dim),
                              offset);
        }
        const std::size_t payload = static_cast<std::size_t>(d) * 4;
        if (bytes.size() - offset - 4 < payload) {
            throw FormatError(std::string(kind) + ": truncated record at byte offset " +
                                  std::to_string(offset),
                              offset);
        }
        dim = d;
        const std::size_t old = data.size();
        data.resize(old + static_cast<std::size_t>(d));
        std::memcpy(data.data() + old, bytes.data() + offset + 4, payload);
        offset += 4 + payload;
        ++rows;
    }
    return Matrix<T>(rows, static_cast<std::size_t>(dim), std::move(data));
}

template <typename T>
void write_vecs(const std::filesystem::path& path, const Matrix<T>& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    const auto dim = static_cast<std::int32_t>(m.dim());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out.write(reinterpret_cast<const char*>(&dim), 4);
        out.write(reinterpret_cast<const char*>(m.row(i).data()),
                  static_cast<std::streamsize>(m.dim() * sizeof(T)));
    }
    if (!out) throw DataError("failed writing " + path.string());
}

void check_split(const QuerySet& split, std::size_t dim, std::size_t n, const char* name) {
    if (!split.vectors.empty() && split.vectors.dim() != dim)
        throw DataError(std::string(name) + " queries have dim " +
                        std::to_string(split.vectors.dim()) + ", base has " + std::to_string(dim));
    if (!split.gt.empty()) {
        if (split.gt.size() != split.size())
            throw DataError(std::string(name) + " ground truth size mismatch");
        for (auto id : split.gt)
            if (id >= n) throw DataError(std::string(name) + " ground truth id out of range");
    }
}

} // namespace

FloatMatrix parse_fvecs(std::span<const std::uint8_t> bytes) { return parse_vecs<float>(bytes, "fvecs"); }
IntMatrix parse_ivecs(std::span<const std::uint8_t> bytes) { return parse_vecs<std::int32_t>(bytes, "ivecs"); }
FloatMatrix load_fvecs(const std::filesystem::path& path) { return parse_fvecs(read_file(path)); }
IntMatrix load_ivecs(const std::filesystem::path& path) { return parse_ivecs(read_file(path)); }
void write_fvecs(const std::filesystem::path& path, const FloatMatrix& m) { write_vecs(path, m); }
void write_ivecs(const std::filesystem::path& path, const IntMatrix& m) { write_vecs(path, m); }

void Dataset::validate() const {
    if (base.empty()) throw DataError("dataset has an empty base set");
    check_split(train, dim(), size(), "train");
    check_split(val, dim(), size(), "val");
    check_split(test, dim(), size(), "test");
}

std::vector<VertexId> brute_force_gt(const FloatMatrix& base, const FloatMatrix& queries,
                                     std::size_t threads) {
    if (base.empty()) throw DataError("brute_force_gt: empty base");
    if (!queries.empty() && queries.dim() != base.dim())
        throw DataError("brute_force_gt: query dim " + std::to_string(queries.dim()) +
                        " != base dim " + std::to_string(base.dim()));
    std::vector<VertexId> out(queries.rows());
    parallel_for(queries.rows(), threads, [&](std::size_t q) {
        double best = std::numeric_limits<double>::infinity();
        VertexId arg = 0;
        for (std::size_t i = 0; i < base.rows(); ++i) {
            const double d = squared_l2(queries.row(q), base.row(i));
            if (d < best) {
                best = d;
                arg = static_cast<VertexId>(i);
            }
        }
        out[q] = arg;
    });
    return out;
}

void compute_ground_truth(Dataset& ds, std::size_t threads) {
    for (QuerySet* s : {&ds.train, &ds.val, &ds.test})
        s->gt = s->vectors.empty() ? std::vector<VertexId>{} : brute_force_gt(ds.base, s->vectors, threads);
}

VertexId medoid(const FloatMatrix& base) {
    if (base.empty()) throw DataError("medoid: empty base");
    const std::size_t n = base.rows();
    double best = std::numeric_limits<double>::infinity();
    VertexId arg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += std::sqrt(squared_l2(base.row(i), base.row(j)));
        if (sum < best) {
            best = sum;
            arg = static_cast<VertexId>(i);
        }
    }
    return arg;
}

Dataset synth_clusters(std::size_t n_clusters, std::size_t per_cluster, std::size_t dim,
                       float spread, std::uint64_t seed, QueryCounts counts) {
    if (n_clusters == 0 || per_cluster == 0 || dim == 0)
        throw DataError("synth_clusters: counts must be positive");
    if (!(spread >= 0.0f)) throw DataError("synth_clusters: spread must be non-negative");

    Rng rng(seed);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    std::normal_distribution<float> noise(0.0f, 1.0f);

    FloatMatrix centers(n_clusters, dim);
    for (std::size_t c = 0; c < n_clusters; ++c)
        for (auto& x : centers.row(c)) x = unit(rng);

    auto draw = [&](std::size_t c, std::span<float> out) {
        auto center = centers.row(c);
        for (std::size_t j = 0; j < dim; ++j) out[j] = center[j] + spread * noise(rng);
    };

    Dataset ds;
    ds.base = FloatMatrix(n_clusters * per_cluster, dim);
    ds.base_labels.resize(ds.base.rows());
    for (std::size_t c = 0; c < n_clusters; ++c) {
        for (std::size_t i = 0; i < per_cluster; ++i) {
            const std::size_t row = c * per_cluster + i;
            draw(c, ds.base.row(row));
            ds.base_labels[row] = static_cast<std::int32_t>(c);
        }
    }

    std::uniform_int_distribution<std::size_t> pick(0, n_clusters - 1);
    auto make_split = [&](std::size_t count) {
        QuerySet s;
        s.vectors = FloatMatrix(count, dim);
        s.labels.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t c = pick(rng);
            draw(c, s.vectors.row(i));
            s.labels[i] = static_cast<std::int32_t>(c);
        }
        return s;
    };
    ds.train = make_split(counts.train);
    ds.val = make_split(counts.val);
    ds.test = make_split(counts.test);
    return ds;
}

Dataset synth_clusters(std::size_t n_clusters, std::size_t per_cluster, std::size_t dim,
                       float spread, std::uint64_t seed) {
    const std::size_t n = n_clusters * per_cluster;
    return synth_clusters(n_clusters, per_cluster, dim, spread, seed, {10 * n, 2 * n, 2 * n});
}

std::size_t remove_exact_duplicates(QuerySet& queries, const FloatMatrix& reference) {
    if (queries.vectors.empty() || reference.empty()) return 0;
    if (queries.vectors.dim() != reference.dim())
        throw DataError("remove_exact_duplicates: dim mismatch");
    const std::size_t bytes = reference.dim() * sizeof(float);
    auto key = [bytes](std::span<const float> r) {
        return std::string(reinterpret_cast<const char*>(r.data()), bytes);
    };
    std::unordered_set<std::string> seen;
    seen.reserve(reference.rows());
    for (std::size_t i = 0; i < reference.rows(); ++i) seen.insert(key(reference.row(i)));

    QuerySet kept;
    kept.vectors = FloatMatrix(0, queries.vectors.dim());
    std::size_t removed = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (seen.contains(key(queries.vectors.row(i)))) {
            ++removed;
            continue;
        }
        kept.vectors.append_row(queries.vectors.row(i));
        if (!queries.gt.empty()) kept.gt.push_back(queries.gt[i]);
        if (!queries.labels.empty()) kept.labels.push_back(queries.labels[i]);
    }
    queries = std::move(kept);
    return removed;
}

} // namespace simgraph
