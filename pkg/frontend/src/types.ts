// Wire types mirroring the session service JSON bodies.

export interface TaskSummary {
  id: string;
  name: string;
  rows: number;
  cols: number;
  has_reference: boolean;
  has_algorithmic: boolean;
}

export interface SchemaNode {
  name: string;
  children?: SchemaNode[];
  datatype?: string;
  instances?: string[];
}

export interface AttributeInfo {
  id: number;
  name: string;
  path: string[];
  datatype: string | null;
  instances: string[];
}

export interface TaskDetail extends TaskSummary {
  ref_size: number;
  schema_a: SchemaNode;
  schema_b: SchemaNode;
  attributes_a: AttributeInfo[];
  attributes_b: AttributeInfo[];
}

export type Measure = "r" | "p" | "f";
export type ThresholdMode = "static" | "dynamic";
export type Estimator = "unbiased" | "calibrated";

export interface Verdict {
  index: number;
  row: number;
  col: number;
  confidence_used: number;
  threshold: number;
  accepted: boolean;
  running_match_size: number;
  timestamp: number;
}

export interface SessionSnapshot {
  id: string;
  task: string;
  status: "open" | "finalized";
  target: { measure: Measure; mode: ThresholdMode };
  estimator: Estimator;
  verdicts: Verdict[];
  accepted: [number, number][];
  current_threshold: number | null;
  running_p_estimate: number;
  running_f_estimate: number;
  final: FinalReport | null;
}

export interface QualityNumbers {
  precision: number;
  recall: number;
  fmeasure: number;
}

export interface FinalReport {
  match: [number, number][];
  hp_match: [number, number][];
  rb_match: [number, number][];
  warning: string | null;
  report: { final: QualityNumbers; hp_only: QualityNumbers } | null;
}

export interface RBChoice {
  variant: "uniform" | "max_delta_row" | "max_delta_col" | "dominants";
  param: number;
}
