#ifndef DPENET_DPENET_HPP_
#define DPENET_DPENET_HPP_

#include "dpenet/distributions.hpp"
#include "dpenet/error.hpp"
#include "dpenet/explain.hpp"
#include "dpenet/io.hpp"
#include "dpenet/log.hpp"
#include "dpenet/model.hpp"
#include "dpenet/relabel.hpp"
#include "dpenet/rng.hpp"
#include "dpenet/sampler.hpp"

#endif  // DPENET_DPENET_HPP_
