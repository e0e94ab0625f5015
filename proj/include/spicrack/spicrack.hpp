#pragma once

// Umbrella header for the whole workbench.

#include "spicrack/coa.hpp"
#include "spicrack/core.hpp"
#include "spicrack/io.hpp"
#include "spicrack/kpa.hpp"
#include "spicrack/metrics.hpp"
#include "spicrack/parallel.hpp"
#include "spicrack/prng.hpp"
#include "spicrack/solver.hpp"
#include "spicrack/synth.hpp"
