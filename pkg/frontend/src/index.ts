export { CHART_KINDS, ChartKind, ChartRequest, chartSvg, render } from "./render.js";
export { EmptyInput, FigureError, MissingColumn, UnknownKind } from "./errors.js";
export { Table, readTable } from "./table.js";
export { histogramDensity } from "./charts/metric_density.js";
export { tInterval } from "./charts/coef_ci.js";
