#pragma once

#include "vcomp/composition_grammar.hpp"
#include "vcomp/effect_catalog.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace vcomp {

/// Character-level acceptor for composition text of one sample. Lines are
/// produced in segment order; within a line every prefix must extend to a
/// strict-valid line whose triggers ground in that segment's sentence and
/// whose effects exist in the pool.
class CompositionConstraint {
public:
    CompositionConstraint(std::span<const Sentence> sentences, const EffectPool& pool, const FormatOptions& format);

    std::size_t num_segments() const noexcept { return triggers_.size(); }

    /// `line` is a viable prefix of a valid line for segment `k`.
    bool viable_line_prefix(std::size_t k, std::string_view line) const;
    /// `line` is a complete valid line for segment `k`.
    bool complete_line(std::size_t k, std::string_view line) const;

    /// Decides whether appending `piece` to `text` keeps it viable. Newlines
    /// are only accepted after a complete line that is not the last one.
    bool accepts(std::string_view text, std::string_view piece) const;
    /// The end token is accepted once the last line is complete.
    bool accepts_end(std::string_view text) const;

    /// Cuts a trailing partial element (or header) and appends the missing
    /// lines so the result strict-parses.
    std::string finalize(std::string_view text) const;

private:
    bool viable_elements(std::size_t k, std::string_view rest) const;
    bool complete_elements(std::size_t k, std::string_view rest) const;
    bool viable_element(std::size_t k, std::string_view e) const;
    bool complete_element(std::size_t k, std::string_view e) const;
    std::string header(std::size_t k) const;

    FormatOptions format_;
    std::vector<std::vector<std::string>> triggers_;  // sorted valid trigger texts per segment
    std::vector<std::string> tails_;                   // sorted ")->category:name"
};

}  // namespace vcomp
