#pragma once

// Text output helpers shared by the exporters: fixed float formatting,
// CSV rows, atomic file writes and content hashes.

#include "ambiview/so3.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ambiview {

/// 17 significant digits: enough to round-trip any double.
inline std::string format_double(double v) { return fmt::format("{:.17g}", v); }

inline nlohmann::json rotation_to_json(const Rotation& r) { return nlohmann::json::array({r.w(), r.x(), r.y(), r.z()}); }

inline Rotation rotation_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) {
        throw std::invalid_argument("rotation must be a [w,x,y,z] array");
    }
    return Rotation(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

/// Comma-delimited, '.' decimal point, LF line endings.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row_strings(header); }

    void row_strings(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) {
            throw std::logic_error("CsvWriter: row has wrong number of cells");
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) {
                out_ << ',';
            }
            out_ << cells[i];
        }
        out_ << '\n';
    }

    [[nodiscard]] std::string str() const { return out_.str(); }

private:
    std::size_t columns_;
    std::ostringstream out_;
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        cells.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return cells;
}

/// Reads a CSV file into rows of cells; the header row is returned first.
inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string() + " for reading");
    }
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

/// Writes through a sibling temporary file and renames it into place, so a
/// failed run never leaves a truncated output behind.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error("cannot move output into place at " + path.string() + ": " + ec.message());
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string() + " for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Lowercase hex SHA-256.
inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        hex += fmt::format("{:02x}", digest[i]);
    }
    return hex;
}

} // namespace ambiview
