#include "occ/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include "json.hpp"

#include "occ/errors.hpp"

namespace occ {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("invalid feature value '" + s + "'", line);
    }
}

int parse_int(const std::string& s, std::size_t line) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("invalid integer '" + s + "'", line);
    return v;
}

// Rebuilds class -> cluster maps from per-sample labels.
OrientationMap derive_map(const std::string& name, const std::vector<int>& classes,
                          const std::vector<int>& labels, const std::vector<std::size_t>& lines) {
    OrientationMap map{name, {}};
    if (labels.empty()) return map;
    const int class_count = *std::max_element(classes.begin(), classes.end()) + 1;
    map.class_to_cluster.assign(static_cast<std::size_t>(class_count), -1);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        int& slot = map.class_to_cluster[static_cast<std::size_t>(classes[i])];
        if (slot == -1) {
            slot = labels[i];
        } else if (slot != labels[i]) {
            throw ParseError("orientation " + name + " assigns class " + std::to_string(classes[i]) +
                                 " to two clusters",
                             lines[i]);
        }
    }
    for (int& s : map.class_to_cluster)
        if (s == -1) s = 0;  // class ids with no samples
    return map;
}

void finish_dataset(Dataset& d, std::vector<double>& values, std::size_t dim,
                    const std::vector<std::size_t>& lines) {
    d.features = Tensor2(d.classes.size(), dim, std::move(values));
    if (d.classes.empty()) throw ParseError("dataset has no rows", 1);
    d.map_a = derive_map("A", d.classes, d.orient_a, lines);
    d.map_b = derive_map("B", d.classes, d.orient_b, lines);
}

Dataset load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open dataset file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty dataset file", 1);
    const auto header = split_csv(line);

    std::size_t dim = 0;
    while (dim < header.size() && header[dim] == "f" + std::to_string(dim)) ++dim;
    if (dim == 0) throw ParseError("header must start with f0", 1);
    auto column = [&](const std::string& name) -> int {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    };
    const int class_col = column("class");
    if (class_col < 0) throw ParseError("missing class column", 1);
    const int a_col = column("orientA");
    const int b_col = column("orientB");
    if ((a_col < 0) != (b_col < 0)) throw ParseError("orientA and orientB must appear together", 1);

    Dataset d;
    d.provenance = path.string();
    std::vector<double> values;
    std::vector<std::size_t> lines;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " columns, got " +
                                 std::to_string(cells.size()),
                             line_no);
        for (std::size_t f = 0; f < dim; ++f) values.push_back(parse_double(cells[f], line_no));
        const int cls = parse_int(cells[static_cast<std::size_t>(class_col)], line_no);
        if (cls < 0) throw ParseError("negative class id", line_no);
        d.classes.push_back(cls);
        if (a_col >= 0) {
            d.orient_a.push_back(parse_int(cells[static_cast<std::size_t>(a_col)], line_no));
            d.orient_b.push_back(parse_int(cells[static_cast<std::size_t>(b_col)], line_no));
        }
        lines.push_back(line_no);
    }
    finish_dataset(d, values, dim, lines);
    return d;
}

Dataset load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open dataset file " + path.string());
    Dataset d;
    d.provenance = path.string();
    std::vector<double> values;
    std::vector<std::size_t> lines;
    std::size_t dim = 0;
    bool with_orient = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (!row.is_object()) throw ParseError("row is not a JSON object", line_no);
        if (!row.contains("class")) throw ParseError("missing class key", line_no);
        std::size_t row_dim = 0;
        while (row.contains("f" + std::to_string(row_dim))) ++row_dim;
        if (lines.empty()) {
            dim = row_dim;
            with_orient = row.contains("orientA");
            if (dim == 0) throw ParseError("row has no f0 key", line_no);
        } else if (row_dim != dim) {
            throw ParseError("inconsistent feature count", line_no);
        }
        try {
            for (std::size_t f = 0; f < dim; ++f) {
                const double v = row.at("f" + std::to_string(f)).get<double>();
                if (!std::isfinite(v)) throw ParseError("non-finite feature", line_no);
                values.push_back(v);
            }
            d.classes.push_back(row.at("class").get<int>());
            if (with_orient) {
                d.orient_a.push_back(row.at("orientA").get<int>());
                d.orient_b.push_back(row.at("orientB").get<int>());
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("bad value: ") + e.what(), line_no);
        }
        if (d.classes.back() < 0) throw ParseError("negative class id", line_no);
        lines.push_back(line_no);
    }
    finish_dataset(d, values, dim, lines);
    return d;
}

std::string fmt_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

int OrientationMap::operator()(int latent_class) const {
    if (latent_class < 0 || static_cast<std::size_t>(latent_class) >= class_to_cluster.size())
        throw InvalidInput("orientation " + name + " has no entry for class " +
                           std::to_string(latent_class));
    return class_to_cluster[static_cast<std::size_t>(latent_class)];
}

int OrientationMap::cluster_count() const {
    return std::set<int>(class_to_cluster.begin(), class_to_cluster.end()).size();
}

void OrientationMap::validate(int class_count) const {
    if (static_cast<int>(class_to_cluster.size()) != class_count)
        throw ConfigError("orientation " + name + " must map all " + std::to_string(class_count) +
                          " classes");
    if (cluster_count() < 2) throw ConfigError("orientation " + name + " has < 2 target clusters");
    for (int c : class_to_cluster)
        if (c < 0 || c >= cluster_count())
            throw ConfigError("orientation " + name + " cluster ids must be 0..T-1");
}

OrientationMap default_orientation_a() { return {"A", {0, 0, 1, 1}}; }
OrientationMap default_orientation_b() { return {"B", {0, 1, 0, 1}}; }

const std::vector<int>& Dataset::labels(char orientation) const {
    if (orientation == 'A' || orientation == 'a') return orient_a;
    if (orientation == 'B' || orientation == 'b') return orient_b;
    throw InvalidInput(std::string("unknown orientation '") + orientation + "'");
}

const OrientationMap& Dataset::map(char orientation) const {
    if (orientation == 'A' || orientation == 'a') return map_a;
    if (orientation == 'B' || orientation == 'b') return map_b;
    throw InvalidInput(std::string("unknown orientation '") + orientation + "'");
}

void SyntheticSpec::validate() const {
    if (classes < 2) throw ConfigError("synthetic data needs >= 2 classes");
    if (samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
    if (dim < 2) throw ConfigError("feature dim must be >= 2");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw ConfigError("noise_sigma must be finite and >= 0");
    orientation_a.validate(classes);
    orientation_b.validate(classes);
    // Same partition up to renaming counts as identical.
    bool same_partition = true;
    for (int i = 0; i < classes && same_partition; ++i)
        for (int j = i + 1; j < classes; ++j)
            if ((orientation_a(i) == orientation_a(j)) != (orientation_b(i) == orientation_b(j))) {
                same_partition = false;
                break;
            }
    if (same_partition) throw ConfigError("orientation maps induce identical partitions");
    const int block_a = dim / 2;
    const int block_b = dim - block_a;
    if (block_a < orientation_a.cluster_count() && orientation_a.cluster_count() > 2)
        throw ConfigError("feature block A too narrow for its cluster codes");
    if (block_b < orientation_b.cluster_count() && orientation_b.cluster_count() > 2)
        throw ConfigError("feature block B too narrow for its cluster codes");
}

namespace {

// One-hot code scaled by separation; a one-wide block codes two clusters as
// 0 / separation.
void write_code(std::span<double> block, int cluster, double separation) {
    if (block.size() == 1) {
        block[0] = separation * cluster;
        return;
    }
    block[static_cast<std::size_t>(cluster)] = separation;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    const std::size_t n = static_cast<std::size_t>(spec.classes * spec.samples_per_class);
    const std::size_t dim = static_cast<std::size_t>(spec.dim);
    const std::size_t block_a = dim / 2;

    Dataset d;
    d.features = Tensor2(n, dim);
    d.map_a = spec.orientation_a;
    d.map_b = spec.orientation_b;
    d.provenance = "synthetic";
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    std::size_t r = 0;
    for (int cls = 0; cls < spec.classes; ++cls) {
        for (int s = 0; s < spec.samples_per_class; ++s, ++r) {
            auto row = d.features.row(r);
            write_code(row.subspan(0, block_a), spec.orientation_a(cls), spec.separation_a);
            write_code(row.subspan(block_a), spec.orientation_b(cls), spec.separation_b);
            if (spec.noise_sigma > 0.0)
                for (double& v : row) v += noise(rng);
            d.classes.push_back(cls);
            d.orient_a.push_back(spec.orientation_a(cls));
            d.orient_b.push_back(spec.orientation_b(cls));
        }
    }
    return d;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    return generate_synthetic(spec, rng);
}

Dataset load_dataset(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".jsonl" || ext == ".json") return load_jsonl(path);
    return load_csv(path);
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write dataset file " + path.string());
    const bool jsonl = path.extension() == ".jsonl" || path.extension() == ".json";
    const bool orient = d.has_orientations();
    if (!jsonl) {
        for (std::size_t f = 0; f < d.dim(); ++f) out << 'f' << f << ',';
        out << "class" << (orient ? ",orientA,orientB" : "") << '\n';
    }
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (jsonl) {
            nlohmann::ordered_json row;
            for (std::size_t f = 0; f < d.dim(); ++f) row["f" + std::to_string(f)] = d.features(i, f);
            row["class"] = d.classes[i];
            if (orient) {
                row["orientA"] = d.orient_a[i];
                row["orientB"] = d.orient_b[i];
            }
            out << row.dump() << '\n';
        } else {
            for (std::size_t f = 0; f < d.dim(); ++f) out << fmt_double(d.features(i, f)) << ',';
            out << d.classes[i];
            if (orient) out << ',' << d.orient_a[i] << ',' << d.orient_b[i];
            out << '\n';
        }
    }
    if (!out) throw InvalidInput("write failed for " + path.string());
}

Tensor2 principal_projection(const Tensor2& points) {
    const auto n = static_cast<Eigen::Index>(points.rows());
    const auto d = static_cast<Eigen::Index>(points.cols());
    Tensor2 out(points.rows(), 2);
    if (n == 0 || d == 0) return out;
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            x(i, j) = points(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    // Eigenvalues ascend; take the last two columns.
    for (int k = 0; k < 2 && k < d; ++k) {
        Eigen::VectorXd dir = eig.eigenvectors().col(d - 1 - k);
        Eigen::Index arg = 0;
        dir.cwiseAbs().maxCoeff(&arg);
        if (dir(arg) < 0) dir = -dir;
        const Eigen::VectorXd proj = x * dir;
        for (Eigen::Index i = 0; i < n; ++i) out(static_cast<std::size_t>(i), static_cast<std::size_t>(k)) = proj(i);
    }
    return out;
}

std::vector<ScatterRow> scatter_rows(const Dataset& dataset, const Tensor2& zhat,
                                     const std::vector<int>& assignment) {
    if (zhat.rows() != dataset.size() || assignment.size() != dataset.size())
        throw InvalidInput("scatter: embeddings/assignment do not match dataset size");
    const Tensor2 pcs = principal_projection(zhat);
    std::vector<ScatterRow> rows(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        rows[i] = {pcs(i, 0), pcs(i, 1), dataset.classes[i],
                   dataset.has_orientations() ? dataset.orient_a[i] : -1,
                   dataset.has_orientations() ? dataset.orient_b[i] : -1, assignment[i]};
    }
    return rows;
}

void export_scatter(const Dataset& dataset, const Tensor2& zhat, const std::vector<int>& assignment,
                    const std::filesystem::path& path) {
    const auto rows = scatter_rows(dataset, zhat, assignment);
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write scatter file " + path.string());
    out << "pc1,pc2,class,orientA,orientB,cluster\n";
    for (const auto& r : rows)
        out << fmt_double(r.pc1) << ',' << fmt_double(r.pc2) << ',' << r.latent_class << ','
            << r.orient_a << ',' << r.orient_b << ',' << r.cluster << '\n';
    if (!out) throw InvalidInput("write failed for " + path.string());
}

}  // namespace occ
