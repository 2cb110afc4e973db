import * as THREE from 'three';
import type { InlineMesh, Plan, SceneBundle, Tube, Vec3 } from './bundleSchema';
import type { StructureKey } from './viewerState';

// Three.js scene construction from a validated bundle. Everything here
// is geometry plumbing; no readout number is derived from it.

// Fixed legend (one color per structure, the same in the side panel).
export const STRUCTURE_COLORS: Record<StructureKey, number> = {
    st: 0x4f8fc0,
    sv: 0x9bb7d4,
    modiolar_wall: 0xd4a843,
    ossicles: 0xcfc8bd,
    facial_nerve: 0xc0392b,
    chorda: 0xe67e22,
    array: 0x2e9e5b,
    centerline: 0x888888,
};

export const TRAJECTORY_COLOR = 0x7f8c8d;
export const TRAJECTORY_ACTIVE_COLOR = 0xf1c40f;

export function meshGeometry(mesh: InlineMesh): THREE.BufferGeometry {
    const positions = new Float32Array(mesh.vertices.length * 3);
    mesh.vertices.forEach((vertex, i) => positions.set(vertex, i * 3));
    const index = new Uint32Array(mesh.triangles.length * 3);
    mesh.triangles.forEach((tri, i) => index.set(tri, i * 3));
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute('position', new THREE.BufferAttribute(positions, 3));
    geometry.setIndex(new THREE.BufferAttribute(index, 1));
    geometry.computeVertexNormals();
    return geometry;
}

export function polylineGeometry(points: readonly Vec3[]): THREE.BufferGeometry {
    const positions = new Float32Array(points.length * 3);
    points.forEach((point, i) => positions.set(point, i * 3));
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute('position', new THREE.BufferAttribute(positions, 3));
    return geometry;
}

/**
 * Tube surface around a centerline with per-point radius, built with
 * parallel-transported ring frames so the rings never flip.
 */
export function tubeGeometry(tube: Tube, radialSegments = 16): THREE.BufferGeometry {
    const centers = tube.centerline.map((p) => new THREE.Vector3(...p));
    const count = centers.length;

    const tangents: THREE.Vector3[] = [];
    for (let i = 0; i < count; i++) {
        const ahead = centers[Math.min(i + 1, count - 1)]!;
        const behind = centers[Math.max(i - 1, 0)]!;
        tangents.push(ahead.clone().sub(behind).normalize());
    }

    const normals: THREE.Vector3[] = [];
    const first = tangents[0]!;
    const pick = Math.abs(first.x) < 0.9 ? new THREE.Vector3(1, 0, 0) : new THREE.Vector3(0, 1, 0);
    normals.push(pick.clone().sub(first.clone().multiplyScalar(pick.dot(first))).normalize());
    for (let i = 1; i < count; i++) {
        const carried = normals[i - 1]!.clone();
        const tangent = tangents[i]!;
        carried.sub(tangent.clone().multiplyScalar(carried.dot(tangent))).normalize();
        normals.push(carried);
    }

    const positions = new Float32Array(count * radialSegments * 3);
    let cursor = 0;
    for (let i = 0; i < count; i++) {
        const binormal = tangents[i]!.clone().cross(normals[i]!);
        const radius = tube.radius[i]!;
        for (let j = 0; j < radialSegments; j++) {
            const theta = (2 * Math.PI * j) / radialSegments;
            const offset = normals[i]!.clone().multiplyScalar(Math.cos(theta) * radius)
                .add(binormal.clone().multiplyScalar(Math.sin(theta) * radius));
            positions[cursor++] = centers[i]!.x + offset.x;
            positions[cursor++] = centers[i]!.y + offset.y;
            positions[cursor++] = centers[i]!.z + offset.z;
        }
    }

    const index: number[] = [];
    for (let i = 0; i < count - 1; i++) {
        for (let j = 0; j < radialSegments; j++) {
            const a = i * radialSegments + j;
            const b = i * radialSegments + ((j + 1) % radialSegments);
            const c = a + radialSegments;
            const d = b + radialSegments;
            index.push(a, b, c, b, d, c);
        }
    }

    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute('position', new THREE.BufferAttribute(positions, 3));
    geometry.setIndex(index);
    geometry.computeVertexNormals();
    return geometry;
}

/** Endpoints of the trajectory line: a lead-in outside plus a short reach past the entry. */
export function trajectoryEndpoints(plan: Plan, leadMm = 8, reachMm = 4): [Vec3, Vec3] {
    const entry = new THREE.Vector3(...plan.entry_point);
    const direction = new THREE.Vector3(...plan.vector).normalize();
    const start = entry.clone().sub(direction.clone().multiplyScalar(leadMm));
    const end = entry.clone().add(direction.clone().multiplyScalar(reachMm));
    return [[start.x, start.y, start.z], [end.x, end.y, end.z]];
}

/** Clockwise angle of the clock hand from 12:00, in degrees. */
export function clockHandAngleDeg(text: string): number {
    const match = /^(\d{2}):(\d{2})$/.exec(text);
    if (match === null) {
        throw new RangeError(`not a clock reading: ${text}`);
    }
    const hour = Number(match[1]) % 12;
    const minute = Number(match[2]);
    return hour * 30 + minute * 0.5;
}

function surfaceMaterial(color: number, opacity = 1): THREE.MeshLambertMaterial {
    return new THREE.MeshLambertMaterial({
        color,
        transparent: opacity < 1,
        opacity,
        side: THREE.DoubleSide,
    });
}

function arrayGroup(bundle: SceneBundle): THREE.Group {
    const group = new THREE.Group();
    const contacts = bundle.array.contact_centers;

    const sphere = new THREE.SphereGeometry(0.22, 12, 8);
    const instanced = new THREE.InstancedMesh(
        sphere,
        new THREE.MeshLambertMaterial({ color: STRUCTURE_COLORS.array }),
        contacts.length,
    );
    const placement = new THREE.Matrix4();
    contacts.forEach((center, i) => {
        placement.makeTranslation(...center);
        instanced.setMatrixAt(i, placement);
    });
    group.add(instanced);

    const markerSphere = new THREE.SphereGeometry(0.16, 10, 6);
    const markers = new THREE.InstancedMesh(
        markerSphere,
        new THREE.MeshLambertMaterial({ color: 0x1b6138 }),
        bundle.array.marker_points.length,
    );
    bundle.array.marker_points.forEach((point, i) => {
        placement.makeTranslation(...point);
        markers.setMatrixAt(i, placement);
    });
    group.add(markers);

    const thread = [...contacts, ...bundle.array.marker_points];
    group.add(new THREE.Line(
        polylineGeometry(thread),
        new THREE.LineBasicMaterial({ color: STRUCTURE_COLORS.array }),
    ));
    return group;
}

export interface BuiltScene {
    root: THREE.Group;
    structures: Record<StructureKey, THREE.Object3D>;
    trajectories: THREE.Line[];
}

/**
 * Assemble the render graph: duct meshes, clearance tubes, the seated
 * array, the centerline, and one trajectory line per plan. Requires a
 * bundle whose meshes are inlined.
 */
export function buildScene(bundle: SceneBundle): BuiltScene {
    const root = new THREE.Group();
    const structures = {} as Record<StructureKey, THREE.Object3D>;

    const opacities: Partial<Record<StructureKey, number>> = { st: 0.35, sv: 0.25 };
    for (const key of ['st', 'sv', 'modiolar_wall', 'ossicles'] as const) {
        const ref = bundle.scene.meshes[key];
        if ('file' in ref) {
            throw new Error(`mesh ${key} is file-referenced; re-export with meshes inlined`);
        }
        const mesh = new THREE.Mesh(
            meshGeometry(ref),
            surfaceMaterial(STRUCTURE_COLORS[key], opacities[key] ?? 1),
        );
        mesh.name = key;
        structures[key] = mesh;
        root.add(mesh);
    }

    for (const key of ['facial_nerve', 'chorda'] as const) {
        const mesh = new THREE.Mesh(
            tubeGeometry(bundle.scene.tubes[key]),
            surfaceMaterial(STRUCTURE_COLORS[key]),
        );
        mesh.name = key;
        structures[key] = mesh;
        root.add(mesh);
    }

    const centerline = new THREE.Line(
        polylineGeometry(bundle.scene.st_centerline.points),
        new THREE.LineBasicMaterial({ color: STRUCTURE_COLORS.centerline }),
    );
    centerline.name = 'centerline';
    structures.centerline = centerline;
    root.add(centerline);

    const array = arrayGroup(bundle);
    array.name = 'array';
    structures.array = array;
    root.add(array);

    const trajectories = bundle.plans.map((plan, i) => {
        const line = new THREE.Line(
            polylineGeometry(trajectoryEndpoints(plan)),
            new THREE.LineBasicMaterial({ color: TRAJECTORY_COLOR }),
        );
        line.name = `trajectory_${i}`;
        root.add(line);
        return line;
    });

    return { root, structures, trajectories };
}

/** Recolor trajectory lines so exactly the active plan stands out. */
export function highlightTrajectory(trajectories: THREE.Line[], activeIndex: number): void {
    trajectories.forEach((line, i) => {
        (line.material as THREE.LineBasicMaterial).color.setHex(
            i === activeIndex ? TRAJECTORY_ACTIVE_COLOR : TRAJECTORY_COLOR,
        );
    });
}
