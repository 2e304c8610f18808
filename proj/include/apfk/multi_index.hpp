#pragma once

// Multi-indices with finite support over frequency positions 1..N, their
// weighted norms, and enumeration of truncated index sets.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "apfk/errors.hpp"

namespace apfk {

// Frequency weight <<j>> ^ s with <<j>> = max{|j|,1}; positions start at 1.
inline double frequency_weight(int j, double s) {
    return std::pow(static_cast<double>(j < 1 ? 1 : j), s);
}

// Integer vector k with finite support. Entries are stored sparsely as
// (position, value) pairs, sorted by position, never zero.
class MultiIndex {
public:
    struct Entry {
        int pos;   // frequency position j >= 1
        int val;   // k_j != 0
        friend bool operator==(const Entry&, const Entry&) = default;
        friend auto operator<=>(const Entry&, const Entry&) = default;
    };

    MultiIndex() = default;

    // Builds from (position, value) pairs; zero values are dropped.
    explicit MultiIndex(const std::vector<Entry>& entries) {
        for (const Entry& e : entries) {
            if (e.pos < 1) throw index_error("MultiIndex: position must be >= 1");
            if (e.val != 0) entries_.push_back(e);
        }
        std::sort(entries_.begin(), entries_.end(),
                  [](const Entry& a, const Entry& b) { return a.pos < b.pos; });
        for (std::size_t i = 1; i < entries_.size(); ++i)
            if (entries_[i - 1].pos == entries_[i].pos)
                throw index_error("MultiIndex: duplicate position " + std::to_string(entries_[i].pos));
    }

    static MultiIndex unit(int pos, int val = 1) {
        return MultiIndex({Entry{pos, val}});
    }

    const std::vector<Entry>& entries() const { return entries_; }
    bool is_zero() const { return entries_.empty(); }
    std::size_t support_size() const { return entries_.size(); }

    int at(int pos) const {
        for (const Entry& e : entries_)
            if (e.pos == pos) return e.val;
        return 0;
    }

    // Largest position in the support, 0 for the zero index.
    int max_position() const { return entries_.empty() ? 0 : entries_.back().pos; }

    // |k|_s = sum_j <<j>>^s |k_j|
    double norm_s(double s) const {
        double acc = 0.0;
        for (const Entry& e : entries_)
            acc += frequency_weight(e.pos, s) * std::abs(static_cast<double>(e.val));
        return acc;
    }

    // |k|_1 = sum_j |k_j|
    std::int64_t norm_one() const {
        std::int64_t acc = 0;
        for (const Entry& e : entries_) acc += std::abs(static_cast<std::int64_t>(e.val));
        return acc;
    }

    MultiIndex operator-() const {
        MultiIndex r = *this;
        for (Entry& e : r.entries_) e.val = -e.val;
        return r;
    }

    friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
        MultiIndex r;
        auto ia = a.entries_.begin(), ib = b.entries_.begin();
        while (ia != a.entries_.end() || ib != b.entries_.end()) {
            if (ib == b.entries_.end() || (ia != a.entries_.end() && ia->pos < ib->pos)) {
                r.entries_.push_back(*ia++);
            } else if (ia == a.entries_.end() || ib->pos < ia->pos) {
                r.entries_.push_back(*ib++);
            } else {
                int v = ia->val + ib->val;
                if (v != 0) r.entries_.push_back(Entry{ia->pos, v});
                ++ia;
                ++ib;
            }
        }
        return r;
    }

    friend MultiIndex operator-(const MultiIndex& a, const MultiIndex& b) { return a + (-b); }

    // Deterministic structural order: by support, position-wise, then values.
    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
    friend auto operator<=>(const MultiIndex& a, const MultiIndex& b) {
        return a.entries_ <=> b.entries_;
    }

    // Sign of the first nonzero component; 0 for the zero index. Used to pick
    // one representative of each {k, -k} pair.
    int lex_sign() const {
        if (entries_.empty()) return 0;
        return entries_.front().val > 0 ? 1 : -1;
    }

    // Textual form: space-separated "j:k_j" pairs; zero index is "".
    std::string to_string() const {
        std::string out;
        for (const Entry& e : entries_) {
            if (!out.empty()) out += ' ';
            out += std::to_string(e.pos) + ':' + std::to_string(e.val);
        }
        return out;
    }

    static MultiIndex parse(const std::string& text) {
        std::vector<Entry> es;
        std::istringstream in(text);
        std::string tok;
        while (in >> tok) {
            auto colon = tok.find(':');
            if (colon == std::string::npos)
                throw index_error("MultiIndex::parse: bad token '" + tok + "'");
            try {
                int pos = std::stoi(tok.substr(0, colon));
                int val = std::stoi(tok.substr(colon + 1));
                es.push_back(Entry{pos, val});
            } catch (const std::exception&) {
                throw index_error("MultiIndex::parse: bad token '" + tok + "'");
            }
        }
        return MultiIndex(std::move(es));
    }

private:
    std::vector<Entry> entries_;
};

// Truncated index set: all k with support in {1..N} and |k|_s <= K, ordered by
// (|k|_s, structural order). Contains the zero index and is symmetric under
// negation by construction.
class IndexSet {
public:
    // Enumeration fails fast when the ball holds more than `cap` indices.
    static IndexSet enumerate(int active_count, double radius, double weight_exponent,
                              std::uint64_t cap = default_cardinality_cap()) {
        if (active_count < 1) throw index_error("IndexSet: active_count must be >= 1");
        if (!(radius > 0)) throw index_error("IndexSet: radius must be positive");
        if (!(weight_exponent > 0)) throw index_error("IndexSet: weight exponent must be positive");

        IndexSet set;
        set.n_ = active_count;
        set.k_ = radius;
        set.s_ = weight_exponent;

        const std::uint64_t bail = std::max<std::uint64_t>(cap * 16, cap);
        std::uint64_t count = 0;
        bool exact = count_rec(active_count, radius, weight_exponent, bail, count);
        if (count > cap) {
            std::string size = exact ? std::to_string(count)
                                     : ("at least " + std::to_string(count));
            throw index_error("IndexSet: cardinality " + size + " exceeds cap " +
                              std::to_string(cap));
        }

        set.members_.reserve(count);
        MultiIndex scratch;
        std::vector<MultiIndex::Entry> stack;
        enumerate_rec(active_count, radius, weight_exponent, stack, set.members_);

        std::sort(set.members_.begin(), set.members_.end(),
                  [weight_exponent](const MultiIndex& a, const MultiIndex& b) {
                      double na = a.norm_s(weight_exponent), nb = b.norm_s(weight_exponent);
                      if (na != nb) return na < nb;
                      return a < b;
                  });
        return set;
    }

    static constexpr std::uint64_t default_cardinality_cap() { return 2'000'000; }

    int active_count() const { return n_; }
    double radius() const { return k_; }
    double weight_exponent() const { return s_; }
    const std::vector<MultiIndex>& members() const { return members_; }
    std::size_t size() const { return members_.size(); }

    bool contains(const MultiIndex& k) const {
        if (k.max_position() > n_) return false;
        return k.norm_s(s_) <= k_ * (1.0 + 1e-12) + 1e-12;
    }

    bool same_family(const IndexSet& other) const {
        return n_ == other.n_ && k_ == other.k_ && s_ == other.s_;
    }

private:
    IndexSet() = default;

    // Counts the ball; returns false when the bail threshold cut it short.
    static bool count_rec(int pos, double budget, double s, std::uint64_t bail,
                          std::uint64_t& count) {
        if (pos == 0) {
            ++count;
            return count <= bail;
        }
        double w = frequency_weight(pos, s);
        int m = static_cast<int>(std::floor(budget / w + 1e-9));
        for (int v = -m; v <= m; ++v) {
            if (!count_rec(pos - 1, budget - w * std::abs(static_cast<double>(v)), s, bail, count))
                return false;
        }
        return true;
    }

    static void enumerate_rec(int pos, double budget, double s,
                              std::vector<MultiIndex::Entry>& stack,
                              std::vector<MultiIndex>& out) {
        if (pos == 0) {
            std::vector<MultiIndex::Entry> es(stack.rbegin(), stack.rend());
            out.push_back(MultiIndex(std::move(es)));
            return;
        }
        double w = frequency_weight(pos, s);
        int m = static_cast<int>(std::floor(budget / w + 1e-9));
        for (int v = -m; v <= m; ++v) {
            if (v != 0) stack.push_back(MultiIndex::Entry{pos, v});
            enumerate_rec(pos - 1, budget - w * std::abs(static_cast<double>(v)), s, stack, out);
            if (v != 0) stack.pop_back();
        }
    }

    int n_ = 0;
    double k_ = 0;
    double s_ = 1;
    std::vector<MultiIndex> members_;
};

} // namespace apfk
