#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace csr {

// CSV output is byte-deterministic: LF line endings, '.' decimal separator,
// %.9g for floating point fields regardless of locale.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    }

    CsvWriter& header(const std::vector<std::string>& cols) { return row_strings(cols); }

    CsvWriter& row_strings(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
        return *this;
    }

    static std::string num(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return buf;
    }
    static std::string num(int v) { return std::to_string(v); }
    static std::string num(long long v) { return std::to_string(v); }
    static std::string num(size_t v) { return std::to_string(v); }

private:
    std::ofstream out_;
};

}  // namespace csr
