// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "usim/error.hpp"
#include "usim/fft.hpp"
#include "usim/format.hpp"
#include "usim/harness.hpp"
#include "usim/image.hpp"
#include "usim/metrics.hpp"
#include "usim/pgm.hpp"
#include "usim/pyramid.hpp"
#include "usim/sequence.hpp"
#include "usim/stats.hpp"
#include "usim/synth.hpp"
#include "usim/tracking.hpp"
