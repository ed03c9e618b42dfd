#pragma once

#include "ddsq/error.hpp"
#include "ddsq/rational.hpp"
#include "ddsq/timebase.hpp"
#include "ddsq/nco.hpp"
#include "ddsq/coherence.hpp"
#include "ddsq/program.hpp"
#include "ddsq/codec.hpp"
#include "ddsq/dsl.hpp"
#include "ddsq/shaping.hpp"
#include "ddsq/backplane.hpp"
#include "ddsq/mch.hpp"
#include "ddsq/simulator.hpp"
#include "ddsq/fft.hpp"
#include "ddsq/rf_chain.hpp"
#include "ddsq/noise.hpp"
#include "ddsq/manifest.hpp"
