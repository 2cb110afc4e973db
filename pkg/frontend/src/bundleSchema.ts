import { z } from 'zod';

// Runtime validation of everything the viewer ingests or emits. The
// shapes mirror the JSON-schema contracts shipped with the planner
// (scene manifest, scene bundle, selection record); nothing renders
// unless the whole bundle validates.

const vec3 = z.tuple([z.number(), z.number(), z.number()]);

const clockText = z.string().regex(/^(0[1-9]|1[0-2]):(00|30)$/, 'expected a HH:00 or HH:30 clock reading');

const rigidTransform = z.strictObject({
    rotation: z.tuple([vec3, vec3, vec3]),
    translation: vec3,
});

const triangle = z.tuple([
    z.number().int().nonnegative(),
    z.number().int().nonnegative(),
    z.number().int().nonnegative(),
]);

const inlineMesh = z.strictObject({
    vertices: z.array(vec3),
    triangles: z.array(triangle),
}).refine(
    (mesh) => mesh.triangles.every((tri) => tri.every((index) => index < mesh.vertices.length)),
    { message: 'triangle index out of range' },
);

const meshRef = z.union([
    z.strictObject({ file: z.string() }),
    inlineMesh,
]);

const tube = z.strictObject({
    centerline: z.array(vec3).min(2),
    radius: z.array(z.number().positive()).min(2),
}).refine((t) => t.centerline.length === t.radius.length, {
    message: 'tube centerline and radius lengths differ',
});

const sceneFrame = z.strictObject({
    modiolar_axis: vec3,
    apex_origin: vec3,
    rw_center: vec3,
    rw_plane_normal: vec3,
    zero_angle_ray: vec3,
    stapes_center: vec3,
    winding: z.union([z.literal(1), z.literal(-1)]),
});

export const sceneManifestSchema = z.strictObject({
    format: z.literal('cochlear-scene'),
    version: z.number().int().min(1),
    units: z.literal('mm'),
    meshes: z.strictObject({
        st: meshRef,
        sv: meshRef,
        modiolar_wall: meshRef,
        ossicles: meshRef,
    }),
    tubes: z.strictObject({
        facial_nerve: tube,
        chorda: tube,
    }),
    frame: sceneFrame,
    st_centerline: z.strictObject({
        points: z.array(vec3).min(2),
        angles_deg: z.array(z.number()).min(2),
    }).refine((c) => c.points.length === c.angles_deg.length, {
        message: 'centerline points and angles lengths differ',
    }),
});

export const entryKinds = ['RW_CENTER', 'SLIGHT_EXTENDED_RW', 'SUBSTANTIAL_EXTENDED_RW'] as const;

const planReadouts = z.strictObject({
    entry_site: z.string(),
    clearance_facial_nerve: z.string(),
    clearance_chorda: z.string(),
    clearance_ossicles: z.string(),
    tilt: z.string(),
    curl_clock: clockText,
    entry_clock: clockText,
    base_depth: z.string(),
    overinsert_depth: z.string(),
    predicted_aid: z.string(),
    predicted_mmd: z.string(),
});

const plan = z.strictObject({
    entry_kind: z.enum(entryKinds),
    entry_point: vec3,
    vector: vec3,
    clearance_facial_nerve_mm: z.number().nonnegative(),
    clearance_chorda_mm: z.number().nonnegative(),
    clearance_ossicles_mm: z.number().nonnegative(),
    tilt_deg: z.number().min(0).max(90),
    curl_clock: clockText,
    entry_clock: clockText,
    base_depth_mm: z.number(),
    overinsert_depth_mm: z.number(),
    predicted_aid_deg: z.number(),
    predicted_mmd_mm: z.number().nonnegative(),
    readouts: planReadouts,
    plan_text: z.string().min(1),
});

export const sceneBundleSchema = z.strictObject({
    format: z.literal('insertion-plan-bundle'),
    version: z.number().int().min(1),
    units: z.literal('mm'),
    case_id: z.string().min(1),
    scene: sceneManifestSchema,
    array: z.strictObject({
        contact_centers: z.array(vec3).min(2),
        marker_points: z.tuple([vec3, vec3, vec3]),
        contact_order: z.literal('tip_first').optional(),
        registered_pose: rigidTransform,
    }),
    plans: z.array(plan).min(1),
});

export const selectionRecordSchema = z.strictObject({
    case_id: z.string().min(1),
    selected_entry_kind: z.enum(entryKinds),
    timestamp: z.string().regex(
        /^[0-9]{4}-[0-9]{2}-[0-9]{2}T[0-9]{2}:[0-9]{2}:[0-9]{2}(\.[0-9]+)?(Z|[+-][0-9]{2}:[0-9]{2})$/,
        'expected an ISO-8601 timestamp with offset',
    ),
});

export type Vec3 = z.infer<typeof vec3>;
export type InlineMesh = z.infer<typeof inlineMesh>;
export type MeshRef = z.infer<typeof meshRef>;
export type Tube = z.infer<typeof tube>;
export type SceneManifest = z.infer<typeof sceneManifestSchema>;
export type PlanReadouts = z.infer<typeof planReadouts>;
export type Plan = z.infer<typeof plan>;
export type SceneBundle = z.infer<typeof sceneBundleSchema>;
export type SelectionRecord = z.infer<typeof selectionRecordSchema>;
export type EntryKind = (typeof entryKinds)[number];

export type ParseOutcome =
    | { ok: true; bundle: SceneBundle }
    | { ok: false; message: string };

function describeIssues(error: z.ZodError): string {
    const lines = error.issues.slice(0, 4).map((issue) => {
        const path = issue.path.length > 0 ? issue.path.join('.') : '(root)';
        return `${path}: ${issue.message}`;
    });
    const extra = error.issues.length - lines.length;
    if (extra > 0) {
        lines.push(`and ${extra} more problem${extra === 1 ? '' : 's'}`);
    }
    return lines.join('; ');
}

/** Validate raw JSON into a bundle, or explain why it is unusable. */
export function parseBundle(data: unknown): ParseOutcome {
    const result = sceneBundleSchema.safeParse(data);
    if (result.success) {
        return { ok: true, bundle: result.data };
    }
    return { ok: false, message: `bundle rejected: ${describeIssues(result.error)}` };
}

/** True when every scene mesh carries its geometry inline. */
export function meshesInlined(bundle: SceneBundle): boolean {
    return Object.values(bundle.scene.meshes).every((ref) => !('file' in ref));
}
