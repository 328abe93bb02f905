// Writes the bundled toy treebank: gen_toy_treebank [count] [seed] > data/toy_treebank.conllu
#include "ipn/toy_grammar.hpp"

#include <iostream>
#include <string>

int main(int argc, char** argv) {
  std::size_t count = argc > 1 ? std::stoul(argv[1]) : 60;
  std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 2019;
  auto sentences = ipn::toy_treebank(count, seed);
  ipn::write_conll(std::cout, sentences);
  return 0;
}
