#include "sde/matrix_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sde/errors.hpp"

namespace sde {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'E', 'M'};
constexpr unsigned char kVersion = 0x01;

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t double_bits(double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    return bits;
}

double bits_double(std::uint64_t bits) {
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw NumericError("format_double failed");
    return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw FormatError("malformed numeric value '" + std::string(text) + "'");
    }
    return v;
}

std::string matrix_to_csv(const Matrix& m) {
    std::string out = "# rows=" + std::to_string(m.rows()) + " cols=" + std::to_string(m.cols()) + "\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out.push_back(',');
            out += format_double(m(i, j));
        }
        out.push_back('\n');
    }
    return out;
}

Matrix matrix_from_csv(const std::string& text) {
    std::size_t pos = text.find('\n');
    if (pos == std::string::npos) throw FormatError("csv matrix: missing header line", 0);
    std::string_view header(text.data(), pos);

    std::size_t rows = 0, cols = 0;
    const std::string_view prefix = "# rows=";
    if (header.substr(0, prefix.size()) != prefix) {
        throw FormatError("csv matrix: header must start with '# rows='", 0);
    }
    std::size_t cursor = prefix.size();
    auto parse_count = [&](std::string_view tail_marker) -> std::size_t {
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(header.data() + cursor, header.data() + header.size(), value);
        if (ec != std::errc{}) throw FormatError("csv matrix: bad dimension in header", static_cast<long long>(cursor));
        cursor = static_cast<std::size_t>(ptr - header.data());
        if (!tail_marker.empty()) {
            if (header.substr(cursor, tail_marker.size()) != tail_marker) {
                throw FormatError("csv matrix: header must contain ' cols='", static_cast<long long>(cursor));
            }
            cursor += tail_marker.size();
        }
        return value;
    };
    rows = parse_count(" cols=");
    cols = parse_count("");
    if (rows == 0 || cols == 0) throw FormatError("csv matrix: zero dimension in header", 0);

    Matrix m(rows, cols);
    std::size_t line_start = pos + 1;
    for (std::size_t i = 0; i < rows; ++i) {
        if (line_start >= text.size()) {
            throw FormatError("csv matrix: truncated at row " + std::to_string(i),
                              static_cast<long long>(line_start));
        }
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        std::string_view line(text.data() + line_start, line_end - line_start);

        std::size_t field_start = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            std::size_t comma = line.find(',', field_start);
            const bool last = (j + 1 == cols);
            if (last != (comma == std::string_view::npos)) {
                throw FormatError("csv matrix: row " + std::to_string(i) + " has wrong field count",
                                  static_cast<long long>(line_start + field_start));
            }
            std::string_view field =
                line.substr(field_start, last ? std::string_view::npos : comma - field_start);
            double v;
            try {
                v = parse_double(field);
            } catch (const FormatError&) {
                throw FormatError("csv matrix: bad value at row " + std::to_string(i) + " col " +
                                      std::to_string(j),
                                  static_cast<long long>(line_start + field_start));
            }
            if (!std::isfinite(v)) {
                throw FormatError("csv matrix: non-finite value at row " + std::to_string(i),
                                  static_cast<long long>(line_start + field_start));
            }
            m(i, j) = v;
            field_start = comma + 1;
        }
        line_start = line_end + 1;
    }
    return m;
}

std::string matrix_to_binary(const Matrix& m) {
    std::string out(kMagic, sizeof kMagic);
    out.push_back(static_cast<char>(kVersion));
    append_u64_le(out, m.rows());
    append_u64_le(out, m.cols());
    out.reserve(out.size() + 8 * m.size());
    for (double v : m.data()) append_u64_le(out, double_bits(v));
    return out;
}

Matrix matrix_from_binary(const std::string& bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 21) throw FormatError("binary matrix: truncated header", static_cast<long long>(bytes.size()));
    if (std::memcmp(p, kMagic, sizeof kMagic) != 0) throw FormatError("binary matrix: bad magic", 0);
    if (p[4] != kVersion) throw FormatError("binary matrix: unsupported version", 4);
    const std::uint64_t rows = read_u64_le(p + 5);
    const std::uint64_t cols = read_u64_le(p + 13);
    if (rows == 0 || cols == 0) throw FormatError("binary matrix: zero dimension", 5);
    if (rows > (1u << 24) || cols > (1u << 24) || rows * cols > (1ull << 32)) {
        throw FormatError("binary matrix: implausible dimensions", 5);
    }
    const std::size_t expected = 21 + 8 * static_cast<std::size_t>(rows * cols);
    if (bytes.size() != expected) {
        throw FormatError("binary matrix: payload size mismatch", static_cast<long long>(bytes.size()));
    }
    Matrix m(rows, cols);
    const unsigned char* cursor = p + 21;
    for (std::size_t i = 0; i < m.size(); ++i, cursor += 8) {
        const double v = bits_double(read_u64_le(cursor));
        if (!std::isfinite(v)) {
            throw FormatError("binary matrix: non-finite value",
                              static_cast<long long>(cursor - p));
        }
        m.data()[i] = v;
    }
    return m;
}

void write_matrix(const std::filesystem::path& path, const Matrix& m, MatrixFormat fmt) {
    write_file(path, fmt == MatrixFormat::csv ? matrix_to_csv(m) : matrix_to_binary(m));
}

Matrix read_matrix(const std::filesystem::path& path) {
    const std::string contents = read_file(path);
    if (contents.size() >= 4 && std::memcmp(contents.data(), kMagic, 4) == 0) {
        return matrix_from_binary(contents);
    }
    if (!contents.empty() && contents[0] == '#') {
        return matrix_from_csv(contents);
    }
    throw FormatError("unrecognized matrix file '" + path.string() + "'", 0);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
    return contents;
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

}  // namespace sde
