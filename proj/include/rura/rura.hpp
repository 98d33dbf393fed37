#pragma once
// Umbrella header.

#include "rura/cluster.hpp"
#include "rura/core.hpp"
#include "rura/embedding.hpp"
#include "rura/ingest.hpp"
#include "rura/metrics.hpp"
#include "rura/pipeline.hpp"
#include "rura/segeval.hpp"
#include "rura/serialize.hpp"
#include "rura/siamese.hpp"
