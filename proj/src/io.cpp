#include "proxyfair/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>

namespace proxyfair {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(ErrorKind::Io, "cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) {
        throw DataError(ErrorKind::Io, "read failed: " + path.string());
    }
    return std::move(buffer).str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
        throw DataError(ErrorKind::Io, "write failed: " + path.string());
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

/// Non-blank lines paired with their 1-based line numbers.
struct CsvLines {
    std::vector<std::pair<std::size_t, std::string_view>> lines;
};

CsvLines split_lines(std::string_view text) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") {
        text.remove_prefix(3);
    }
    CsvLines out;
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++line_no;
        auto line = trim(text.substr(start, end - start));
        if (!line.empty()) {
            out.lines.emplace_back(line_no, line);
        }
        start = end + 1;
    }
    return out;
}

std::string where(const std::filesystem::path& path, std::size_t line_no) {
    return path.filename().string() + ":" + std::to_string(line_no) + ": ";
}

std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        return std::nullopt;
    }
    return v;
}

std::optional<long long> parse_int(std::string_view s) {
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        return std::nullopt;
    }
    return v;
}

double parse_finite(std::string_view cell, const std::string& context) {
    auto v = parse_double(cell);
    if (!v) {
        throw DataError(ErrorKind::MalformedValue, context + "cannot parse '" + std::string(cell) + "' as a number");
    }
    if (!std::isfinite(*v)) {
        throw DataError(ErrorKind::NonFiniteValue, context + "non-finite value '" + std::string(cell) + "'");
    }
    return *v;
}

void expect_header(const CsvLines& lines, const std::filesystem::path& path,
                   std::initializer_list<std::string_view> names) {
    if (lines.lines.empty()) {
        throw DataError(ErrorKind::EmptyFile, path.string() + " is empty");
    }
    auto fields = split(lines.lines.front().second);
    bool ok = fields.size() == names.size();
    std::size_t i = 0;
    for (auto name : names) {
        if (!ok) {
            break;
        }
        ok = fields[i++] == name;
    }
    if (!ok) {
        std::string expected;
        for (auto name : names) {
            expected += (expected.empty() ? "" : ",") + std::string(name);
        }
        throw DataError(ErrorKind::MalformedHeader,
                        where(path, lines.lines.front().first) + "expected header '" + expected + "'");
    }
}

void check_width(std::size_t got, std::size_t expected, const std::string& context) {
    if (got != expected) {
        throw DataError(ErrorKind::DimensionMismatch, context + "expected " + std::to_string(expected) +
                                                          " fields, got " + std::to_string(got));
    }
}

template <typename T>
void put_le(std::string& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(T); ++b) {
        out.push_back(static_cast<char>((u >> (8 * b)) & 0xFF));
    }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
    T value = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
        value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
    }
    return value;
}

constexpr std::size_t kFembHeader = 4 + 4 + 8 + 8;

EmbeddingMatrix load_csv_embeddings(const std::filesystem::path& path) {
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    if (lines.lines.empty()) {
        throw DataError(ErrorKind::EmptyFile, path.string() + " is empty");
    }
    const auto header = split(lines.lines.front().second);
    if (header.size() < 2 || header[0] != "id") {
        throw DataError(ErrorKind::MalformedHeader, where(path, 1) + "expected header 'id,e0,e1,...'");
    }
    const std::size_t dim = header.size() - 1;
    for (std::size_t c = 0; c < dim; ++c) {
        if (header[c + 1] != "e" + std::to_string(c)) {
            throw DataError(ErrorKind::MalformedHeader,
                            where(path, 1) + "column " + std::to_string(c + 1) + " should be 'e" +
                                std::to_string(c) + "', found '" + std::string(header[c + 1]) + "'");
        }
    }
    if (lines.lines.size() == 1) {
        throw DataError(ErrorKind::EmptyFile, path.string() + " has a header but no rows");
    }

    std::vector<std::string> ids;
    std::vector<double> values;
    ids.reserve(lines.lines.size() - 1);
    values.reserve((lines.lines.size() - 1) * dim);
    for (std::size_t r = 1; r < lines.lines.size(); ++r) {
        const auto [line_no, line] = lines.lines[r];
        const auto fields = split(line);
        const auto row_ctx = where(path, line_no) + "row " + std::to_string(r) + ": ";
        check_width(fields.size(), dim + 1, row_ctx);
        ids.emplace_back(fields[0]);
        for (std::size_t c = 0; c < dim; ++c) {
            values.push_back(parse_finite(fields[c + 1], row_ctx + "column e" + std::to_string(c) + ": "));
        }
    }
    return EmbeddingMatrix(std::move(ids), std::move(values), dim);
}

EmbeddingMatrix load_femb_embeddings(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    const std::string_view data(bytes);
    if (data.empty()) {
        throw DataError(ErrorKind::EmptyFile, path.string() + " is empty");
    }
    if (data.size() < kFembHeader || data.substr(0, 4) != "FEMB") {
        throw DataError(ErrorKind::MalformedHeader, path.string() + ": missing FEMB magic or truncated header");
    }
    const auto version = get_le<std::uint32_t>(data, 4);
    if (version != 1) {
        throw DataError(ErrorKind::MalformedHeader,
                        path.string() + ": unsupported femb version " + std::to_string(version));
    }
    const auto n = get_le<std::uint64_t>(data, 8);
    const auto d = get_le<std::uint64_t>(data, 16);
    if (n == 0) {
        throw DataError(ErrorKind::EmptyFile, path.string() + ": femb declares zero rows");
    }
    if (d == 0) {
        throw DataError(ErrorKind::MalformedHeader, path.string() + ": femb declares zero dimensions");
    }
    const auto avail = data.size() - kFembHeader;
    if (d > avail / 4 || n > avail / (4 * d)) {
        throw DataError(ErrorKind::DimensionMismatch, path.string() + ": payload shorter than n*d values");
    }

    std::vector<double> values(n * d);
    std::size_t off = kFembHeader;
    for (std::size_t k = 0; k < values.size(); ++k, off += 4) {
        const float f = std::bit_cast<float>(get_le<std::uint32_t>(data, off));
        if (!std::isfinite(f)) {
            throw DataError(ErrorKind::NonFiniteValue, path.string() + ": row " + std::to_string(k / d + 1) +
                                                           ", column e" + std::to_string(k % d) +
                                                           ": non-finite value");
        }
        values[k] = f;
    }

    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::uint64_t r = 0; r < n; ++r) {
        if (off + 2 > data.size()) {
            throw DataError(ErrorKind::DimensionMismatch, path.string() + ": id block truncated at row " +
                                                              std::to_string(r + 1));
        }
        const auto len = get_le<std::uint16_t>(data, off);
        off += 2;
        if (off + len > data.size()) {
            throw DataError(ErrorKind::DimensionMismatch, path.string() + ": id block truncated at row " +
                                                              std::to_string(r + 1));
        }
        ids.emplace_back(data.substr(off, len));
        off += len;
    }
    if (off != data.size()) {
        throw DataError(ErrorKind::DimensionMismatch, path.string() + ": trailing bytes after id block");
    }
    return EmbeddingMatrix(std::move(ids), std::move(values), d);
}

std::optional<Gender> parse_gender(std::string_view s, const std::string& ctx) {
    if (s.empty()) {
        return std::nullopt;
    }
    if (s == "F" || s == "f") {
        return Gender::Female;
    }
    if (s == "M" || s == "m") {
        return Gender::Male;
    }
    throw DataError(ErrorKind::MalformedValue, ctx + "gender must be F or M, got '" + std::string(s) + "'");
}

std::optional<int> parse_small_int(std::string_view s, const std::string& ctx, const char* field) {
    if (s.empty()) {
        return std::nullopt;
    }
    auto v = parse_int(s);
    if (!v || *v < -1000000 || *v > 1000000) {
        throw DataError(ErrorKind::MalformedValue, ctx + field + ": cannot parse '" + std::string(s) + "'");
    }
    return static_cast<int>(*v);
}

} // namespace

EmbeddingFormat format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".femb" ? EmbeddingFormat::Femb : EmbeddingFormat::Csv;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, EmbeddingFormat format) {
    return format == EmbeddingFormat::Femb ? load_femb_embeddings(path) : load_csv_embeddings(path);
}

std::size_t femb_size(const EmbeddingMatrix& m) {
    std::size_t size = kFembHeader + m.rows() * m.dim() * 4;
    for (const auto& id : m.ids()) {
        size += 2 + id.size();
    }
    return size;
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, EmbeddingFormat format) {
    std::string out;
    if (format == EmbeddingFormat::Femb) {
        out.reserve(femb_size(m));
        out.append("FEMB");
        put_le<std::uint32_t>(out, 1);
        put_le<std::uint64_t>(out, m.rows());
        put_le<std::uint64_t>(out, m.dim());
        const auto values = m.values();
        for (std::size_t k = 0; k < values.size(); ++k) {
            const auto f = static_cast<float>(values[k]);
            if (!std::isfinite(f)) {
                throw DataError(ErrorKind::NonFiniteValue, "row " + std::to_string(k / m.dim() + 1) +
                                                               ": value overflows 32-bit float");
            }
            put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
        }
        for (const auto& id : m.ids()) {
            put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
            out.append(id);
        }
    } else {
        out.append("id");
        for (std::size_t c = 0; c < m.dim(); ++c) {
            out.append(",e").append(std::to_string(c));
        }
        out.push_back('\n');
        for (std::size_t r = 0; r < m.rows(); ++r) {
            out.append(m.ids()[r]);
            for (double v : m.row(r)) {
                out.push_back(',');
                out.append(format_double(v));
            }
            out.push_back('\n');
        }
    }
    write_file(path, out);
}

MetadataTable load_metadata(const std::filesystem::path& path) {
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    if (lines.lines.empty()) {
        throw DataError(ErrorKind::EmptyFile, path.string() + " is empty");
    }
    const auto header = split(lines.lines.front().second);
    if (header.empty() || header[0] != "id") {
        throw DataError(ErrorKind::MalformedHeader, where(path, 1) + "first column must be 'id'");
    }
    enum Col { Gender_, Age, Label, Prediction, Score };
    std::vector<Col> cols;
    MetadataColumns present;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const auto name = header[c];
        bool* flag = nullptr;
        Col col{};
        if (name == "gender") {
            flag = &present.gender, col = Gender_;
        } else if (name == "age") {
            flag = &present.age, col = Age;
        } else if (name == "label") {
            flag = &present.label, col = Label;
        } else if (name == "prediction") {
            flag = &present.prediction, col = Prediction;
        } else if (name == "score") {
            flag = &present.score, col = Score;
        }
        if (flag == nullptr || *flag) {
            throw DataError(ErrorKind::MalformedHeader,
                            where(path, 1) + "unknown or repeated column '" + std::string(name) + "'");
        }
        *flag = true;
        cols.push_back(col);
    }

    std::vector<std::string> ids;
    std::vector<MetadataRecord> records;
    for (std::size_t r = 1; r < lines.lines.size(); ++r) {
        const auto [line_no, line] = lines.lines[r];
        const auto fields = split(line);
        const auto ctx = where(path, line_no);
        check_width(fields.size(), header.size(), ctx);
        ids.emplace_back(fields[0]);
        MetadataRecord rec;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const auto cell = fields[c + 1];
            switch (cols[c]) {
            case Gender_: rec.gender = parse_gender(cell, ctx); break;
            case Age: rec.age = parse_small_int(cell, ctx, "age"); break;
            case Label: rec.label = parse_small_int(cell, ctx, "label"); break;
            case Prediction: rec.prediction = parse_small_int(cell, ctx, "prediction"); break;
            case Score:
                if (!cell.empty()) {
                    rec.score = parse_finite(cell, ctx + "score: ");
                }
                break;
            }
        }
        records.push_back(rec);
    }
    return MetadataTable(std::move(ids), std::move(records), present);
}

void save_metadata(const MetadataTable& t, const std::filesystem::path& path) {
    std::string out = "id,gender,age,label,prediction,score\n";
    for (std::size_t i = 0; i < t.size(); ++i) {
        const auto& r = t.records()[i];
        out.append(t.ids()[i]).push_back(',');
        if (r.gender) out.append(to_string(*r.gender));
        out.push_back(',');
        if (r.age) out.append(std::to_string(*r.age));
        out.push_back(',');
        if (r.label) out.append(std::to_string(*r.label));
        out.push_back(',');
        if (r.prediction) out.append(std::to_string(*r.prediction));
        out.push_back(',');
        if (r.score) out.append(format_double(*r.score));
        out.push_back('\n');
    }
    write_file(path, out);
}

ClusterAssignment load_assignment(const std::filesystem::path& path) {
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    expect_header(lines, path, {"id", "cluster"});
    std::vector<std::string> ids;
    std::vector<int> labels;
    for (std::size_t r = 1; r < lines.lines.size(); ++r) {
        const auto [line_no, line] = lines.lines[r];
        const auto fields = split(line);
        const auto ctx = where(path, line_no);
        check_width(fields.size(), 2, ctx);
        ids.emplace_back(fields[0]);
        auto v = parse_int(fields[1]);
        if (!v || *v < kNoise || *v > 1'000'000'000) {
            throw DataError(ErrorKind::InvalidCluster, ctx + "bad cluster id '" + std::string(fields[1]) + "'");
        }
        labels.push_back(static_cast<int>(*v));
    }
    return ClusterAssignment(std::move(ids), std::move(labels));
}

void save_assignment(const ClusterAssignment& a, const std::filesystem::path& path) {
    std::string out = "id,cluster\n";
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.append(a.ids()[i]).append(",").append(std::to_string(a.labels()[i])).push_back('\n');
    }
    write_file(path, out);
}

ReducedCoordinates load_coordinates(const std::filesystem::path& path) {
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    expect_header(lines, path, {"id", "x", "y"});
    std::vector<std::string> ids;
    std::vector<Point2> coords;
    for (std::size_t r = 1; r < lines.lines.size(); ++r) {
        const auto [line_no, line] = lines.lines[r];
        const auto fields = split(line);
        const auto ctx = where(path, line_no);
        check_width(fields.size(), 3, ctx);
        ids.emplace_back(fields[0]);
        coords.push_back({parse_finite(fields[1], ctx + "x: "), parse_finite(fields[2], ctx + "y: ")});
    }
    return ReducedCoordinates(std::move(ids), std::move(coords));
}

void save_coordinates(const ReducedCoordinates& c, const std::filesystem::path& path) {
    std::string out = "id,x,y\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        out.append(c.ids()[i])
            .append(",")
            .append(format_double(c.coords()[i].x))
            .append(",")
            .append(format_double(c.coords()[i].y))
            .push_back('\n');
    }
    write_file(path, out);
}

void save_subset(const SubsetSelection& s, const std::filesystem::path& path) {
    std::string out = "id,cluster\n";
    const bool with_clusters = s.selected_clusters.size() == s.selected_ids.size();
    for (std::size_t i = 0; i < s.selected_ids.size(); ++i) {
        out.append(s.selected_ids[i]).push_back(',');
        if (with_clusters) {
            out.append(std::to_string(s.selected_clusters[i]));
        }
        out.push_back('\n');
    }
    write_file(path, out);
}

std::vector<std::string> load_subset_ids(const std::filesystem::path& path) {
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    expect_header(lines, path, {"id", "cluster"});
    std::vector<std::string> ids;
    for (std::size_t r = 1; r < lines.lines.size(); ++r) {
        const auto [line_no, line] = lines.lines[r];
        const auto fields = split(line);
        check_width(fields.size(), 2, where(path, line_no));
        ids.emplace_back(fields[0]);
    }
    validate_ids(ids);
    return ids;
}

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

void save_numeric_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) {
        out.append(c ? "," : "").append(header[c]);
    }
    out.push_back('\n');
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            out.append(c ? "," : "").append(format_double(columns[c][r]));
        }
        out.push_back('\n');
    }
    write_file(path, out);
}

} // namespace proxyfair
