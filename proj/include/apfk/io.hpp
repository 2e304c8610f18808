#pragma once

// Persistence: hull coefficient dumps (text, full precision, deterministic
// order), CSV tables and key=value report blocks.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "apfk/errors.hpp"
#include "apfk/fourier_series.hpp"

namespace apfk {

inline std::string fmt_double(double x) {
    std::ostringstream out;
    out << std::setprecision(17) << x;
    return out.str();
}

inline std::string fmt_double(Complex z) {
    return fmt_double(z.real()) + " " + fmt_double(z.imag());
}

struct HullDump {
    FourierSeries series;
    double rho = 0.0;
};

// One line per stored mode, "<multiindex text> <re> <im>", zero index first;
// the header records N, s, K and rho. Modes follow the index set's graded
// order, so two dumps of equal series are byte-identical.
inline void save_hull(std::ostream& out, const FourierSeries& f, double rho) {
    const IndexSet& set = *f.index_set();
    out << "apfk-hull v1\n";
    out << "N=" << set.active_count() << "\n";
    out << "s=" << fmt_double(set.weight_exponent()) << "\n";
    out << "K=" << fmt_double(set.radius()) << "\n";
    out << "rho=" << fmt_double(rho) << "\n";
    out << "modes=" << f.mode_count() << "\n";
    for (const MultiIndex& k : set.members()) {
        Complex c = f.coeff(k);
        if (c == 0.0 && f.coeffs().find(k) == f.coeffs().end()) continue;
        std::string kt = k.to_string();
        if (!kt.empty()) out << kt << ' ';
        out << fmt_double(c) << "\n";
    }
}

inline void save_hull(const std::filesystem::path& path, const FourierSeries& f, double rho) {
    std::ofstream out(path);
    if (!out) throw io_error("save_hull: cannot open " + path.string());
    save_hull(out, f, rho);
}

inline HullDump load_hull(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "apfk-hull v1")
        throw io_error("load_hull: bad header line");
    auto read_kv = [&](const std::string& key) {
        if (!std::getline(in, line) || line.rfind(key + "=", 0) != 0)
            throw io_error("load_hull: expected " + key + "=");
        return line.substr(key.size() + 1);
    };
    int n = std::stoi(read_kv("N"));
    double s = std::stod(read_kv("s"));
    double K = std::stod(read_kv("K"));
    double rho = std::stod(read_kv("rho"));
    std::size_t modes = static_cast<std::size_t>(std::stoull(read_kv("modes")));

    auto set = std::make_shared<IndexSet>(IndexSet::enumerate(n, K, s));
    FourierSeries f(set);
    for (std::size_t i = 0; i < modes; ++i) {
        if (!std::getline(in, line)) throw io_error("load_hull: truncated mode list");
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
        if (tokens.size() < 2) throw io_error("load_hull: bad mode line '" + line + "'");
        std::string index_text;
        for (std::size_t t = 0; t + 2 < tokens.size(); ++t) {
            if (!index_text.empty()) index_text += ' ';
            index_text += tokens[t];
        }
        MultiIndex k = MultiIndex::parse(index_text);
        double re = std::stod(tokens[tokens.size() - 2]);
        double im = std::stod(tokens[tokens.size() - 1]);
        f.set_coeff(k, Complex(re, im));
    }
    return HullDump{std::move(f), rho};
}

inline HullDump load_hull(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("load_hull: cannot open " + path.string());
    return load_hull(in);
}

// Comma-separated table with a header row.
inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw io_error("write_csv: cannot open " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i)
        out << header[i] << (i + 1 < header.size() ? "," : "\n");
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i)
            out << row[i] << (i + 1 < row.size() ? "," : "\n");
}

// Ordered key=value block; doubles at full precision.
class KvReport {
public:
    void add(const std::string& key, const std::string& value) { items_.emplace_back(key, value); }
    void add(const std::string& key, double value) { add(key, fmt_double(value)); }
    void add(const std::string& key, int value) { add(key, std::to_string(value)); }
    void add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }
    void add(const std::string& key, bool value) { add(key, std::string(value ? "true" : "false")); }

    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

    void write_kv(std::ostream& out) const {
        for (const auto& [k, v] : items_) out << k << "=" << v << "\n";
    }

    // Aligned "key  value" text.
    void write_text(std::ostream& out) const {
        std::size_t width = 0;
        for (const auto& [k, v] : items_) width = std::max(width, k.size());
        for (const auto& [k, v] : items_)
            out << std::left << std::setw(static_cast<int>(width) + 2) << k << v << "\n";
    }

    void save(const std::filesystem::path& dir, const std::string& stem = "report") const {
        std::ofstream kv(dir / (stem + ".kv"));
        if (!kv) throw io_error("KvReport: cannot open " + (dir / (stem + ".kv")).string());
        write_kv(kv);
        std::ofstream txt(dir / (stem + ".txt"));
        if (!txt) throw io_error("KvReport: cannot open " + (dir / (stem + ".txt")).string());
        write_text(txt);
    }

private:
    std::vector<std::pair<std::string, std::string>> items_;
};

} // namespace apfk
