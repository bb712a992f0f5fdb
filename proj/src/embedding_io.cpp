#include "clair/embedding_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "clair/error.hpp"
#include "clair/rng.hpp"

namespace clair {

namespace {

static_assert(std::endian::native == std::endian::little, "EMB1 I/O assumes a little-endian host");

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

void check_finite(const Matrix& m, const char* what) {
    for (double v : m.data())
        if (!std::isfinite(v)) fail(ErrorKind::NonFinite, std::string(what) + " contains a non-finite value");
}

} // namespace

void EmbeddingSet::validate() const {
    if (size() < 1 || dim() < 1) fail(ErrorKind::InvalidConfig, "embedding set '" + domain + "' is empty");
    check_finite(vectors, "embedding set");
    if (!labels.empty()) {
        if (labels.size() != size()) fail(ErrorKind::CorruptLabels, "label count differs from row count");
        if (!class_names.empty())
            for (std::uint32_t l : labels)
                if (l != kUnlabeled && l >= class_names.size())
                    fail(ErrorKind::CorruptLabels, "label " + std::to_string(l) + " outside class list");
    }
}

void AnchorSet::validate() const {
    if (count() < 2) fail(ErrorKind::InvalidConfig, "anchor set needs at least two classes");
    if (dim() < 1) fail(ErrorKind::InvalidConfig, "anchor set has zero dimension");
    if (class_names.size() != count()) fail(ErrorKind::CorruptLabels, "anchor class names do not match anchor count");
    check_finite(anchors, "anchor set");
    for (std::size_t j = 0; j < count(); ++j)
        if (norm(anchors.row(j)) <= 1e-12) fail(ErrorKind::ZeroVector, "anchor " + std::to_string(j) + " is zero");
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::IoError, "cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(ErrorKind::IoError, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::IoError, "cannot rename onto " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_embedding_set(const EmbeddingSet& set, const std::filesystem::path& path) {
    set.validate();
    nlohmann::json header = {
        {"dim", set.dim()},
        {"count", set.size()},
        {"dtype", "f32le"},
        {"domain", set.domain},
        {"class_names", set.class_names},
        {"has_labels", set.has_labels()},
    };
    if (set.normalized) header["normalized"] = *set.normalized;
    const std::string text = header.dump();

    std::string out(kMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out += text;
    out.reserve(out.size() + set.vectors.data().size() * 4 + set.labels.size() * 4);
    for (double v : set.vectors.data()) {
        const float f = static_cast<float>(v);
        char b[4];
        std::memcpy(b, &f, 4);
        out.append(b, 4);
    }
    for (std::uint32_t l : set.labels) put_u32(out, l);
    write_file_atomic(path, out);
}

EmbeddingSet read_embedding_set(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        fail(ErrorKind::BadMagic, path.string() + " is not an EMB1 file");
    if (bytes.size() < 8) fail(ErrorKind::HeaderMismatch, "truncated header length");
    const std::uint32_t hlen = get_u32(bytes.data() + 4);
    if (bytes.size() < 8ull + hlen) fail(ErrorKind::HeaderMismatch, "truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::HeaderMismatch, std::string("unparsable header: ") + e.what());
    }

    EmbeddingSet set;
    std::size_t dim = 0, count = 0;
    bool has_labels = false;
    try {
        for (const char* key : {"dim", "count", "dtype", "domain"})
            if (!header.contains(key)) fail(ErrorKind::HeaderMismatch, std::string("header lacks '") + key + "'");
        if (header.at("dtype").get<std::string>() != "f32le") fail(ErrorKind::HeaderMismatch, "dtype must be f32le");
        const auto sdim = header.at("dim").get<long long>();
        const auto scount = header.at("count").get<long long>();
        if (sdim < 1 || scount < 1) fail(ErrorKind::HeaderMismatch, "dim and count must be positive");
        dim = static_cast<std::size_t>(sdim);
        count = static_cast<std::size_t>(scount);
        set.domain = header.at("domain").get<std::string>();
        if (header.contains("class_names")) set.class_names = header.at("class_names").get<std::vector<std::string>>();
        if (header.contains("has_labels")) has_labels = header.at("has_labels").get<bool>();
        if (header.contains("normalized")) set.normalized = header.at("normalized").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::HeaderMismatch, std::string("malformed header field: ") + e.what());
    }

    const std::size_t payload = bytes.size() - 8 - hlen;
    const std::size_t expected = count * dim * 4 + (has_labels ? count * 4 : 0);
    if (payload != expected)
        fail(ErrorKind::HeaderMismatch, "payload is " + std::to_string(payload) + " bytes, header implies " +
                                            std::to_string(expected));

    const char* p = bytes.data() + 8 + hlen;
    std::vector<double> data(count * dim);
    for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
        float f;
        std::memcpy(&f, p, 4);
        if (!std::isfinite(f)) fail(ErrorKind::NonFinite, "row " + std::to_string(i / dim) + " is not finite");
        data[i] = f;
    }
    set.vectors = Matrix(count, dim, std::move(data));
    if (has_labels) {
        set.labels.resize(count);
        for (std::size_t i = 0; i < count; ++i, p += 4) set.labels[i] = get_u32(p);
    }
    set.validate();
    return set;
}

void write_anchor_set(const AnchorSet& set, const std::filesystem::path& path) {
    set.validate();
    EmbeddingSet e{set.domain, set.anchors, {}, set.class_names, std::nullopt};
    e.labels.resize(set.count());
    for (std::size_t j = 0; j < set.count(); ++j) e.labels[j] = static_cast<std::uint32_t>(j);
    write_embedding_set(e, path);
}

AnchorSet read_anchor_set(const std::filesystem::path& path) {
    EmbeddingSet e = read_embedding_set(path);
    if (!e.has_labels()) fail(ErrorKind::CorruptLabels, path.string() + " has no anchor labels");
    for (std::size_t j = 0; j < e.size(); ++j)
        if (e.labels[j] != j) fail(ErrorKind::CorruptLabels, "anchor rows must be labeled 0..K-1 in order");
    if (e.class_names.empty())
        for (std::size_t j = 0; j < e.size(); ++j) e.class_names.push_back("class_" + std::to_string(j));
    AnchorSet a{e.domain, std::move(e.vectors), std::move(e.class_names)};
    a.validate();
    return a;
}

void write_matrix(const Matrix& m, const std::string& domain, const std::filesystem::path& path) {
    write_embedding_set(EmbeddingSet{domain, m, {}, {}, std::nullopt}, path);
}

Matrix read_matrix(const std::filesystem::path& path, std::string* domain) {
    EmbeddingSet e = read_embedding_set(path);
    if (domain) *domain = e.domain;
    return std::move(e.vectors);
}

EmbeddingSet subset(const EmbeddingSet& set, const std::vector<std::size_t>& rows) {
    EmbeddingSet out{set.domain, Matrix(rows.size(), set.dim()), {}, set.class_names, set.normalized};
    if (set.has_labels()) out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= set.size()) fail(ErrorKind::ShapeMismatch, "subset row out of range");
        std::copy_n(set.vectors.row(rows[i]).begin(), set.dim(), out.vectors.row(i).begin());
        if (set.has_labels()) out.labels.push_back(set.labels[rows[i]]);
    }
    return out;
}

ValidationSplit split_validation(const EmbeddingSet& set, std::size_t per_class, std::uint64_t seed) {
    if (per_class == 0) fail(ErrorKind::InvalidConfig, "validation per_class must be at least 1");
    if (!set.has_labels()) fail(ErrorKind::NoLabels, "validation split needs labels");

    std::map<std::uint32_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < set.size(); ++i)
        if (set.labels[i] != kUnlabeled) by_class[set.labels[i]].push_back(i);

    std::vector<bool> held(set.size(), false);
    for (const auto& [label, rows] : by_class) {
        if (rows.size() < 2) continue;
        Rng rng = make_rng(seed, "split", {label});
        const auto perm = permutation(rows.size(), rng);
        const std::size_t take = std::min(per_class, rows.size() - 1);
        for (std::size_t t = 0; t < take; ++t) held[rows[perm[t]]] = true;
    }

    ValidationSplit split;
    for (std::size_t i = 0; i < set.size(); ++i) (held[i] ? split.val_rows : split.train_rows).push_back(i);
    split.train = subset(set, split.train_rows);
    if (!split.val_rows.empty()) split.val = subset(set, split.val_rows);
    else split.val = EmbeddingSet{set.domain, Matrix(0, set.dim()), {}, set.class_names, set.normalized};
    return split;
}

} // namespace clair
