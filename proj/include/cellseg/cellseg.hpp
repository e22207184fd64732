#pragma once

#include "cellseg/dataset.hpp"
#include "cellseg/error.hpp"
#include "cellseg/io.hpp"
#include "cellseg/metrics.hpp"
#include "cellseg/morphology.hpp"
#include "cellseg/parallel.hpp"
#include "cellseg/raster.hpp"
#include "cellseg/report.hpp"
#include "cellseg/segment.hpp"
#include "cellseg/version.hpp"
