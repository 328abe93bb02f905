#pragma once

#include "ipn/corpus.hpp"

#include <cstdint>
#include <vector>

namespace ipn {

/// Sentences from a small fixed English-like grammar: determiner/adjective
/// noun phrases with optional prepositional modifiers, intransitive and
/// transitive clauses, object relative clauses, and relative clauses
/// extraposed past the main verb (which yields non-projective arcs).
/// Lengths include the final period and stay within [3, 10]; sentences are
/// distinct. Output is deterministic for a given seed.
std::vector<Sentence> toy_treebank(std::size_t count, std::uint64_t seed);

/// True when some arc spans a token that its head does not dominate.
bool is_non_projective(const Sentence& sentence);

}  // namespace ipn
