#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "weakpheno/cohort.hpp"

namespace weakpheno {

/// prior*L1 / (prior*L1 + (1-prior)*L0); empty when both terms fall below 1e-300.
std::optional<double> bayes_true_probability(double prior, double case_likelihood, double control_likelihood);

/// Poisson counts around a truncated-normal baseline risk. NLP rates are the
/// ICD rates times 1.5 (12/3 informative, 7.5 non-informative); the main-text
/// figure's NLP rate of 2 for cases is not used.
Cohort generate_simplified(std::size_t n, const Scenario& scenario, std::uint64_t seed);

/// Gamma-distributed counts scaled by visit volume, plus 150 auxiliary NLP features.
Cohort generate_lda(std::size_t n, const Scenario& scenario, std::uint64_t seed);

/// Demographics, per-note text/NLP/ICD events, 150 NLP features of which 10 feed the ICD model.
Cohort generate_complex(std::size_t n, const Scenario& scenario, std::uint64_t seed);

Cohort generate_cohort(Generator generator, std::size_t n, const Scenario& scenario, std::uint64_t seed);

/// Expected prevalence for the LDA generator, 1 - Phi(-mu / 0.5).
double lda_target_prevalence(Prevalence prevalence);

}  // namespace weakpheno
