#pragma once

#include "aamatch/market.hpp"
#include "aamatch/io.hpp"
#include "aamatch/mechanisms.hpp"
#include "aamatch/equivalence.hpp"
#include "aamatch/rng.hpp"
#include "aamatch/random_markets.hpp"
#include "aamatch/simulation.hpp"
#include "aamatch/oracle.hpp"
