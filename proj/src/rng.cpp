#include "occq/rng.hpp"

#include <random>

#include "occq/errors.hpp"

namespace occq {

long long sample_poisson(CounterRng& rng, double mean) {
    if (!(mean >= 0.0)) throw DomainError("Poisson mean must be >= 0");
    if (mean == 0.0) return 0;
    std::poisson_distribution<long long> dist(mean);
    return dist(rng);
}

double sample_normal(CounterRng& rng, double mean, double sd) {
    std::normal_distribution<double> dist(mean, sd);
    return dist(rng);
}

}  // namespace occq
