#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfglq {

/// Formats a double with enough digits to round-trip; output is
/// locale-independent and byte-stable across runs.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    }

    void header(const std::vector<std::string>& names) { write_strings(names); }

    void row(const std::vector<double>& values) {
        for (size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            out_ << fmt_double(values[i]);
        }
        out_ << '\n';
    }

private:
    void write_strings(const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
    }
    std::ofstream out_;
};

} // namespace mfglq
