#pragma once

// Reference implementations written independently of the library, used as
// test oracles. They favour obviousness over speed.

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "toptrain/dataset.hpp"
#include "toptrain/entities.hpp"

namespace oracle {

// Answer normalization from an explicit code point table.
std::string normalize(const std::string& s);
std::vector<std::string> tokens(const std::string& normalized);

// Brute-force EM/F1: multiset overlap via sorted merge.
double em(const std::string& pred, const std::vector<std::string>& golds);
double f1(const std::string& pred, const std::vector<std::string>& golds);

// Occurrence test that rejects matches glued to a letter/number/mark.
bool boundary_ok(const std::string& doc, std::size_t begin, std::size_t end);
std::size_t doc_frequency(const std::string& surface, const std::vector<std::string>& docs);

// Top-k surfaces by ln(N/df) descending, surface ascending on ties.
std::vector<std::string> idf_top_k(const std::vector<std::string>& surfaces, const std::vector<std::string>& docs,
                                   std::size_t k);

// Split checks by explicit context bookkeeping. Empty string = ok.
std::string check_holdout(const toptrain::EqaDataset& ds, const toptrain::SplitAssignment& s, double lo, double hi);
std::string check_kfold(const toptrain::EqaDataset& ds, const std::vector<toptrain::SplitAssignment>& folds, int k);

// Dataset shaped like COVID-QA: `records` questions over `contexts` contexts
// with skewed group sizes.
toptrain::EqaDataset surrogate_dataset(std::size_t records, std::size_t contexts, std::uint64_t seed);

}  // namespace oracle
