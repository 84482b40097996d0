#pragma once

#include "intmaps/common.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>
#include <variant>

namespace intmaps::io {

namespace fs = std::filesystem;

/// 17 significant digits, general notation.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (ec != std::errc()) throw std::runtime_error("to_chars failed");
    return std::string(buf, end);
}

using Cell = std::variant<std::int64_t, double, std::string>;

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<Cell> row) {
        INTMAPS_REQUIRE(row.size() == header_.size(), ErrorCode::InvalidArgument, "CSV row width mismatch");
        rows_.push_back(std::move(row));
    }

    std::size_t rows() const noexcept { return rows_.size(); }

    std::string str() const {
        std::string out;
        append_line(out, header_);
        std::vector<std::string> text;
        for (const auto& row : rows_) {
            text.clear();
            for (const Cell& c : row) {
                if (const auto* i = std::get_if<std::int64_t>(&c)) text.push_back(std::to_string(*i));
                else if (const auto* d = std::get_if<double>(&c)) text.push_back(format_double(*d));
                else text.push_back(std::get<std::string>(c));
            }
            append_line(out, text);
        }
        return out;
    }

private:
    static void append_line(std::string& out, const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += fields[i];
        }
        out += '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<Cell>> rows_;
};

/// Write to a sibling temp file, then rename over the target.
inline void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("rename to " + path.string() + " failed: " + ec.message());
    }
}

inline std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace intmaps::io
